#ifndef DCERT_GRAPHS_HPP
#define DCERT_GRAPHS_HPP

// Per-method control-flow graphs, postdominators and control dependence,
// and the class-hierarchy call graph.

#include "dcert/errors.hpp"
#include "dcert/ir.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dcert {

// ---------------------------------------------------------------------------
// Control-flow graph. Nodes are (location, statement); a synthetic exit node
// (stmt == nullptr) is appended when a method has several returns, none at
// all, or an empty body, so the final node is always unique. Unreachable
// statements are pruned and reported in `warnings`.
// ---------------------------------------------------------------------------

struct CfgNode {
    int location = 0;        // index into the original body; -1 = synthetic
    const Stmt* stmt = nullptr;
};

struct Cfg {
    MethodId method;
    std::vector<CfgNode> nodes;
    std::vector<std::vector<int>> succ;
    std::vector<std::vector<int>> pred;
    int init = 0;
    int final = 0;
    std::vector<std::string> warnings;

    size_t size() const { return nodes.size(); }
    const Stmt* stmt(int n) const { return nodes[n].stmt; }
};

inline Cfg build_cfg(const Method& m)
{
    Cfg g;
    g.method = m.id;

    const auto& body = m.body;
    std::map<std::string, int> labels;
    for (size_t i = 0; i < body.size(); ++i)
        if (auto* l = body[i].as<LabelStmt>())
            labels[l->name] = static_cast<int>(i);

    const int n = static_cast<int>(body.size());
    const int exit_idx = n; // virtual exit slot during construction
    std::vector<std::vector<int>> succ0(n + 1);
    auto label_target = [&](const std::string& l, int line) {
        auto it = labels.find(l);
        if (it == labels.end())
            throw AnalysisError("jump to undefined label '" + l + "' at line "
                                + std::to_string(line));
        return it->second;
    };
    for (int i = 0; i < n; ++i) {
        const Stmt& s = body[i];
        if (s.is<Return>()) {
            succ0[i].push_back(exit_idx);
        } else if (auto* go = s.as<Goto>()) {
            succ0[i].push_back(label_target(go->label, s.line));
        } else if (auto* c = s.as<CondGoto>()) {
            int fall = i + 1;
            int target = label_target(c->label, s.line);
            if (fall < n) succ0[i].push_back(fall);
            if (target != fall) succ0[i].push_back(target);
        } else {
            if (i + 1 < n) succ0[i].push_back(i + 1);
        }
    }

    // reachability from the first statement
    std::vector<bool> reach(n + 1, false);
    if (n > 0) {
        std::vector<int> stack{0};
        reach[0] = true;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : succ0[v])
                if (!reach[w]) {
                    reach[w] = true;
                    stack.push_back(w);
                }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!reach[i])
            g.warnings.push_back("pruned unreachable statement at line "
                                 + std::to_string(body[i].line) + " in "
                                 + m.id.str());

    int live_returns = 0;
    for (int i = 0; i < n; ++i)
        if (reach[i] && body[i].is<Return>()) ++live_returns;

    // keep the lone reachable return as the final node when it is the only
    // way out; otherwise append a synthetic exit
    bool synthetic_exit = live_returns != 1 || n == 0;

    std::vector<int> remap(n + 1, -1);
    for (int i = 0; i < n; ++i) {
        if (!reach[i]) continue;
        remap[i] = static_cast<int>(g.nodes.size());
        g.nodes.push_back(CfgNode{i, &body[i]});
    }
    int exit_node = -1;
    if (synthetic_exit) {
        exit_node = static_cast<int>(g.nodes.size());
        g.nodes.push_back(CfgNode{-1, nullptr});
    }

    g.succ.assign(g.nodes.size(), {});
    g.pred.assign(g.nodes.size(), {});
    auto add_edge = [&](int a, int b) {
        auto& sa = g.succ[a];
        if (std::find(sa.begin(), sa.end(), b) == sa.end()) {
            sa.push_back(b);
            g.pred[b].push_back(a);
        }
    };
    for (int i = 0; i < n; ++i) {
        if (!reach[i]) continue;
        for (int w : succ0[i]) {
            if (w == exit_idx) {
                if (synthetic_exit) add_edge(remap[i], exit_node);
                // else: this return IS the final node, no outgoing edge
            } else if (remap[w] >= 0) {
                add_edge(remap[i], remap[w]);
            }
        }
    }
    for (auto& s : g.succ) std::sort(s.begin(), s.end());
    for (auto& s : g.pred) std::sort(s.begin(), s.end());

    g.init = 0;
    if (synthetic_exit) {
        g.final = exit_node;
    } else {
        g.final = -1;
        for (size_t i = 0; i < g.nodes.size(); ++i)
            if (g.succ[i].empty()) g.final = static_cast<int>(i);
    }
    if (g.nodes.empty()) {
        g.nodes.push_back(CfgNode{-1, nullptr});
        g.succ.assign(1, {});
        g.pred.assign(1, {});
        g.init = g.final = 0;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Postdominators and control dependence.
//
// pdoms[n] is the set of nodes that postdominate n (reflexive). Node n is
// control-dependent on predicate p iff some successor s of p has n in
// pdoms(s) while n is not in pdoms(p).
// ---------------------------------------------------------------------------

inline std::vector<std::vector<bool>> postdominators(const Cfg& g)
{
    const size_t n = g.size();
    std::vector<std::vector<bool>> pd(n, std::vector<bool>(n, true));
    pd[g.final].assign(n, false);
    pd[g.final][g.final] = true;

    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < n; ++i) {
            if (static_cast<int>(i) == g.final) continue;
            std::vector<bool> next(n, g.succ[i].empty() ? false : true);
            for (int s : g.succ[i])
                for (size_t k = 0; k < n; ++k)
                    next[k] = next[k] && pd[s][k];
            next[i] = true;
            if (next != pd[i]) {
                pd[i] = std::move(next);
                changed = true;
            }
        }
    }
    return pd;
}

struct ControlDep {
    int predicate;       // node index of the conditional
    std::string cond_var;

    friend bool operator<(const ControlDep& a, const ControlDep& b)
    {
        return std::tie(a.predicate, a.cond_var)
               < std::tie(b.predicate, b.cond_var);
    }
    friend bool operator==(const ControlDep& a, const ControlDep& b)
    {
        return a.predicate == b.predicate && a.cond_var == b.cond_var;
    }
};

// node -> sorted list of predicates it is control-dependent on
using ControlDeps = std::map<int, std::vector<ControlDep>>;

inline ControlDeps control_dependencies(const Cfg& g)
{
    ControlDeps deps;
    auto pd = postdominators(g);
    for (size_t p = 0; p < g.size(); ++p) {
        const Stmt* st = g.stmt(static_cast<int>(p));
        if (!st) continue;
        auto* cond = st->as<CondGoto>();
        if (!cond) continue;
        for (int s : g.succ[p]) {
            for (size_t m = 0; m < g.size(); ++m) {
                if (!pd[s][m]) continue;      // m postdominates s
                if (pd[p][m]) continue;       // but must not postdominate p
                auto& v = deps[static_cast<int>(m)];
                ControlDep d{static_cast<int>(p), cond->var};
                if (std::find(v.begin(), v.end(), d) == v.end())
                    v.push_back(d);
            }
        }
    }
    for (auto& [n, v] : deps) std::sort(v.begin(), v.end());
    return deps;
}

// ---------------------------------------------------------------------------
// Call classification and class-hierarchy resolution
// ---------------------------------------------------------------------------

enum class CallClass { Source, Sink, Pure, External, Concrete };

namespace detail {

// First declarer of (name, arity) walking up from cls. Null when absent.
inline const Method* lookup_in_chain(const Program& p, std::string_view cls,
                                     std::string_view name, int arity)
{
    if (!p.find_class(cls)) return nullptr;
    for (const auto& c : p.superchain(cls))
        if (const Method* m = p.method_in_class(c, name, arity)) return m;
    return nullptr;
}

// All transitive subclasses of root that declare (name, arity) themselves.
inline void collect_overrides(const Program& p, std::string_view root,
                              std::string_view name, int arity,
                              std::vector<const Method*>& out)
{
    for (const auto& sub : p.subclasses_of(root)) {
        if (const Method* m = p.method_in_class(sub, name, arity))
            out.push_back(m);
        collect_overrides(p, sub, name, arity, out);
    }
}

// Dispatch root: the receiver's declared type when it carries the method,
// otherwise the class named at the call site. Calls without arguments
// dispatch statically on the named class.
inline std::string dispatch_root(const Program& p, const Method& caller,
                                 const Call& call)
{
    if (!call.args.empty()) {
        std::string t = type_of(caller, call.args[0]);
        const ClassDecl* cd = p.find_class(t);
        if (cd) {
            if (cd->is_interface) return t;
            if (lookup_in_chain(p, t, call.callee.name(), call.callee.arity()))
                return t;
        }
    }
    return call.callee.cls();
}

// Concrete targets of a call under class-hierarchy dispatch. External
// declarations set *any_external instead of appearing in the result.
// Source, sink and allow-listed callees resolve to nothing: they are
// modeled, not traversed.
inline std::vector<const Method*> resolve_concrete_targets(const Program& p,
                                                           const Method& caller,
                                                           const Call& call,
                                                           bool* any_external)
{
    if (any_external) *any_external = false;
    const auto& cfg = p.config;
    if (cfg.is_source(call.callee) || cfg.is_sink(call.callee)
        || cfg.is_pure(call.callee))
        return {};

    std::string root = dispatch_root(p, caller, call);
    const ClassDecl* rootDecl = p.find_class(root);

    std::vector<const Method*> found;
    if (rootDecl && rootDecl->is_interface) {
        for (const auto& impl : p.implementers_of(root)) {
            if (const Method* m = lookup_in_chain(p, impl, call.callee.name(),
                                                  call.callee.arity()))
                found.push_back(m);
            collect_overrides(p, impl, call.callee.name(),
                              call.callee.arity(), found);
        }
    } else if (rootDecl) {
        if (const Method* m = lookup_in_chain(p, root, call.callee.name(),
                                              call.callee.arity()))
            found.push_back(m);
        collect_overrides(p, root, call.callee.name(), call.callee.arity(),
                          found);
    }
    if (found.empty())
        throw AnalysisError("call to unknown method " + call.callee.str()
                            + " in " + caller.id.str());

    std::vector<const Method*> concrete;
    std::set<std::string> seen;
    for (const Method* m : found) {
        if (m->external) {
            if (any_external) *any_external = true;
        } else if (seen.insert(m->id.str()).second) {
            concrete.push_back(m);
        }
    }
    std::sort(concrete.begin(), concrete.end(),
              [](const Method* a, const Method* b) { return a->id < b->id; });
    return concrete;
}

} // namespace detail

inline CallClass classify_call(const Program& p, const Method& caller,
                               const Call& call)
{
    const auto& cfg = p.config;
    if (cfg.is_source(call.callee)) return CallClass::Source;
    if (cfg.is_sink(call.callee)) return CallClass::Sink;
    if (cfg.is_pure(call.callee)) return CallClass::Pure;
    bool any_external = false;
    auto targets = detail::resolve_concrete_targets(p, caller, call,
                                                    &any_external);
    return targets.empty() && any_external ? CallClass::External
                                           : CallClass::Concrete;
}

// ---------------------------------------------------------------------------
// Call graph
// ---------------------------------------------------------------------------

class CallGraph {
public:
    void add_edge(const MethodId& caller, const MethodId& callee)
    {
        edges_.emplace(caller, callee);
    }

    const std::set<std::pair<MethodId, MethodId>>& edges() const
    {
        return edges_;
    }

    bool has_edge(const MethodId& caller, const MethodId& callee) const
    {
        return edges_.count({caller, callee}) != 0;
    }

    std::vector<MethodId> callers_of(const MethodId& m) const
    {
        std::vector<MethodId> out;
        for (const auto& [a, b] : edges_)
            if (b == m) out.push_back(a);
        return out;
    }

    std::vector<MethodId> callees_of(const MethodId& m) const
    {
        std::vector<MethodId> out;
        for (const auto& [a, b] : edges_)
            if (a == m) out.push_back(b);
        return out;
    }

private:
    std::set<std::pair<MethodId, MethodId>> edges_;
};

inline CallGraph build_call_graph(const Program& p)
{
    CallGraph cg;
    for (const Method* m : p.methods()) {
        for (const auto& s : m->body) {
            auto* call = s.as<Call>();
            if (!call) continue;
            bool any_external = false;
            auto targets = detail::resolve_concrete_targets(p, *m, *call,
                                                            &any_external);
            for (const Method* t : targets) cg.add_edge(m->id, t->id);
        }
    }
    return cg;
}

// ---------------------------------------------------------------------------
// DOT emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string dot_escape(std::string s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline std::string dot_ident(std::string s)
{
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return s;
}

} // namespace detail

inline std::string to_dot(const Cfg& g)
{
    std::ostringstream os;
    os << "digraph cfg_" << detail::dot_ident(g.method.str()) << " {\n";
    for (size_t i = 0; i < g.size(); ++i) {
        std::string label = g.stmt(static_cast<int>(i))
                                    ? std::to_string(g.nodes[i].location) + ": "
                                              + print_stmt(*g.stmt(
                                                      static_cast<int>(i)))
                                    : std::string("exit");
        os << "  n" << i << " [label=\"" << detail::dot_escape(label)
           << "\"];\n";
    }
    for (size_t i = 0; i < g.size(); ++i)
        for (int s : g.succ[i]) os << "  n" << i << " -> n" << s << ";\n";
    os << "}\n";
    return os.str();
}

inline std::string to_dot(const CallGraph& cg)
{
    std::ostringstream os;
    os << "digraph callgraph {\n";
    std::set<std::string> nodes;
    for (const auto& [a, b] : cg.edges()) {
        nodes.insert(a.str());
        nodes.insert(b.str());
    }
    for (const auto& n : nodes)
        os << "  " << detail::dot_ident(n) << " [label=\""
           << detail::dot_escape(n) << "\"];\n";
    for (const auto& [a, b] : cg.edges())
        os << "  " << detail::dot_ident(a.str()) << " -> "
           << detail::dot_ident(b.str()) << ";\n";
    os << "}\n";
    return os.str();
}

}

#endif
