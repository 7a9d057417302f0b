#ifndef DCERT_DATAFLOW_HPP
#define DCERT_DATAFLOW_HPP

// Abstract domain and transfer function. A fact (x, y) over representatives
// states that y flows to x. Statements contribute local flows and kill facts
// targeting the variable they overwrite:
//
//   x := c           flow {}                kill (x, _)
//   x := y           flow {(x,y)}           kill (x, _)
//   x := op y        flow {(x,y)}           kill (x, _)
//   x := y op z      flow {(x,y),(x,z)}     kill (x, _)
//   x := o.f         flow {(x,R(o.f))}      kill (x, _)
//   x := a[i]        flow {(x,R(a[i]))}     kill (x, _)
//   return x         flow {(ret,x)}         kill nothing
//   o.f := x         flow {(R(o.f),x)}      kill nothing (weak update)
//   a[i] := x        flow {(R(a[i]),x)}     kill nothing (weak update)
//   r := call f(..)  flow summary[f] with formals/ret substituted
//                                           kill (r, _)
//   cond/goto/label  flow {}                kill nothing
//
// transfer(d, s) = { (x,y) | exists z. (x,z) in flow(s) and (z,y) in d }
//                  union (d - kill(s, d))
//
// Assignments control-dependent on a conditional additionally flow the
// condition variable into their target. Calls into body-less library code
// flow every argument into the result and the arguments into the receiver.

#include "dcert/alias.hpp"
#include "dcert/errors.hpp"
#include "dcert/graphs.hpp"
#include "dcert/ir.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dcert {

struct Fact {
    RepId to;
    RepId from;
    friend auto operator<=>(const Fact&, const Fact&) = default;
};

class FactSet {
public:
    using const_iterator = std::set<Fact>::const_iterator;

    bool insert(Fact f) { return facts_.insert(f).second; }
    bool contains(Fact f) const { return facts_.count(f) != 0; }
    bool empty() const { return facts_.empty(); }
    size_t size() const { return facts_.size(); }
    const_iterator begin() const { return facts_.begin(); }
    const_iterator end() const { return facts_.end(); }

    bool merge(const FactSet& other)
    {
        bool grew = false;
        for (Fact f : other.facts_) grew |= facts_.insert(f).second;
        return grew;
    }

    // facts whose first component is `to`
    std::pair<const_iterator, const_iterator> with_to(RepId to) const
    {
        return {facts_.lower_bound(Fact{to, 0}),
                facts_.upper_bound(Fact{to, ~RepId(0)})};
    }

    bool subset_of(const FactSet& other) const
    {
        for (Fact f : facts_)
            if (!other.contains(f)) return false;
        return true;
    }

    friend bool operator==(const FactSet&, const FactSet&) = default;

private:
    std::set<Fact> facts_;
};

struct AnalysisStats {
    size_t summarise_calls = 0;
    size_t node_evals = 0;

    void absorb(const AnalysisStats& o)
    {
        summarise_calls += o.summarise_calls;
        node_evals += o.node_evals;
    }
};

// ---------------------------------------------------------------------------
// AnalysisContext: everything derived from a Program that both the analyzer
// and the checker need. Immutable once constructed; summarise only reads it,
// so method summaries may be computed concurrently.
// ---------------------------------------------------------------------------

class AnalysisContext {
public:
    struct CallSite {
        CallClass kind = CallClass::Concrete;
        std::vector<RepId> arg_reps;
        std::optional<RepId> ret_rep;
        std::vector<int> targets; // method indexes, Concrete calls only
    };

    struct NodeInfo {
        // env-independent flows: local table rows, source/sink symbol pairs,
        // library-model pairs, implicit control-dependence pairs
        std::vector<Fact> static_flow;
        std::optional<RepId> kill_target;
        std::optional<CallSite> call;
    };

    struct MethodCtx {
        const Method* method = nullptr;
        Cfg cfg;
        ControlDeps cdeps;
        std::vector<int> rpo;       // processing order: rpo[k] = node id
        std::vector<int> rpo_index; // node id -> position in rpo
        std::vector<Fact> seeds;    // identity facts for IN[init]
        std::vector<NodeInfo> nodes;
    };

    explicit AnalysisContext(const Program& program)
            : prog_(program), partition_(build_array_partition(program)),
              call_graph_(build_call_graph(program))
    {
        ret_rep_ = reps_.intern(Representative::ret());
        for (const auto& s : program.config.symbols())
            sym_reps_[s] = reps_.intern(Representative::sym(s));

        const auto& ms = program.methods();
        for (size_t i = 0; i < ms.size(); ++i)
            method_index_[ms[i]->id] = static_cast<int>(i);
        methods_.resize(ms.size());
        for (size_t i = 0; i < ms.size(); ++i) build_method(static_cast<int>(i));

        callers_.resize(ms.size());
        for (const auto& [a, b] : call_graph_.edges()) {
            auto ia = method_index_.find(a);
            auto ib = method_index_.find(b);
            if (ia != method_index_.end() && ib != method_index_.end())
                callers_[ib->second].push_back(ia->second);
        }
    }

    const Program& program() const { return prog_; }
    const ArrayPartition& partition() const { return partition_; }
    const CallGraph& call_graph() const { return call_graph_; }
    const RepTable& reps() const { return reps_; }
    RepTable& reps() { return reps_; }

    size_t method_count() const { return methods_.size(); }
    const MethodCtx& method_ctx(int i) const { return methods_[i]; }
    const std::vector<int>& callers_of(int i) const { return callers_[i]; }

    int index_of(const MethodId& id) const
    {
        auto it = method_index_.find(id);
        return it == method_index_.end() ? -1 : it->second;
    }
    const MethodId& id_of(int i) const { return methods_[i].method->id; }

    RepId ret_rep() const { return ret_rep_; }
    RepId sym_rep(const std::string& s) const
    {
        auto it = sym_reps_.find(s);
        if (it == sym_reps_.end())
            throw AnalysisError("unknown source/sink symbol: " + s);
        return it->second;
    }

    RepId var_rep(const Method& m, const std::string& id) const
    {
        auto key = rep_key(m.id, id);
        auto it = var_reps_.find(key);
        if (it == var_reps_.end())
            throw AnalysisError("no representative for '" + id + "' in "
                                + m.id.str());
        return it->second;
    }

    bool is_local_var(RepId r) const
    {
        return reps_.rep(r).kind == Representative::Kind::Var;
    }

    std::pair<std::string, std::string> fact_strings(Fact f) const
    {
        return {reps_.str(f.to), reps_.str(f.from)};
    }

private:
    std::string rep_key(const MethodId& m, const std::string& id) const
    {
        return m.str() + "\x1f" + id;
    }

    RepId intern_var(const Method& m, const std::string& id)
    {
        Representative r;
        int pidx = m.param_index(id);
        if (pidx >= 0)
            r = Representative::param(pidx);
        else
            r = Representative::var(m.id, id);
        RepId rid = reps_.intern(r);
        var_reps_.emplace(rep_key(m.id, id), rid);
        return rid;
    }

    void build_method(int idx)
    {
        const Method& m = *prog_.methods()[idx];
        MethodCtx& mc = methods_[idx];
        mc.method = &m;
        mc.cfg = build_cfg(m);
        mc.cdeps = control_dependencies(mc.cfg);

        // processing order: reverse postorder from init, ties by node id
        const size_t n = mc.cfg.size();
        std::vector<bool> seen(n, false);
        std::vector<int> post;
        std::vector<std::pair<int, size_t>> stack; // node, next succ index
        stack.emplace_back(mc.cfg.init, 0);
        seen[mc.cfg.init] = true;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < mc.cfg.succ[v].size()) {
                int w = mc.cfg.succ[v][next++];
                if (!seen[w]) {
                    seen[w] = true;
                    stack.emplace_back(w, 0);
                }
            } else {
                post.push_back(v);
                stack.pop_back();
            }
        }
        mc.rpo.assign(post.rbegin(), post.rend());
        mc.rpo_index.assign(n, -1);
        for (size_t k = 0; k < mc.rpo.size(); ++k) mc.rpo_index[mc.rpo[k]] = static_cast<int>(k);

        // identity seeds: parameters, locals, field and array accesses in
        // the body, and every source/sink symbol
        std::set<RepId> seed_reps;
        for (const auto& pa : m.params) seed_reps.insert(intern_var(m, pa.name));
        for (const auto& l : m.locals) seed_reps.insert(intern_var(m, l.name));
        for (const auto& [s, rid] : sym_reps_) seed_reps.insert(rid);

        mc.nodes.resize(n);
        for (size_t ni = 0; ni < n; ++ni) {
            const Stmt* st = mc.cfg.stmt(static_cast<int>(ni));
            if (!st) continue;
            build_node(idx, m, mc, static_cast<int>(ni), *st, seed_reps);
        }
        for (RepId r : seed_reps) mc.seeds.push_back(Fact{r, r});
        std::sort(mc.seeds.begin(), mc.seeds.end());
    }

    RepId field_rep(const Method& m, const std::string& obj,
                    const std::string& field)
    {
        std::string t = type_of(m, obj);
        std::string cls = hoist_field(prog_, t, field);
        return reps_.intern(Representative::field(cls, field));
    }

    RepId array_rep(const Method& m, const std::string& base)
    {
        auto id = partition_.partition_id(
                ArrayPartition::var_member(m.id, base));
        if (!id)
            throw AnalysisError("identifier '" + base
                                + "' is not tracked as an array in "
                                + m.id.str());
        return reps_.intern(Representative::array(*id));
    }

    void build_node(int midx, const Method& m, MethodCtx& mc, int ni,
                    const Stmt& st, std::set<RepId>& seed_reps)
    {
        NodeInfo& info = mc.nodes[ni];
        auto var = [&](const std::string& id) { return intern_var(m, id); };
        auto flow = [&](RepId to, RepId from) {
            info.static_flow.push_back(Fact{to, from});
        };

        std::optional<RepId> implicit_target; // lhs for control-dep pairs

        if (auto* c = st.as<ConstAssign>()) {
            RepId l = var(c->lhs);
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* c = st.as<Copy>()) {
            RepId l = var(c->lhs);
            flow(l, var(c->rhs));
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* u = st.as<UnaryOp>()) {
            RepId l = var(u->lhs);
            flow(l, var(u->rhs));
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* b = st.as<BinaryOp>()) {
            RepId l = var(b->lhs);
            flow(l, var(b->rhs1));
            flow(l, var(b->rhs2));
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* ar = st.as<ArrayRead>()) {
            RepId l = var(ar->lhs);
            RepId a = array_rep(m, ar->array);
            seed_reps.insert(a);
            flow(l, a);
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* aw = st.as<ArrayWrite>()) {
            RepId a = array_rep(m, aw->array);
            seed_reps.insert(a);
            flow(a, var(aw->rhs));
            implicit_target = a; // weak update, no kill
        } else if (auto* fr = st.as<FieldRead>()) {
            RepId l = var(fr->lhs);
            RepId f = field_rep(m, fr->object, fr->field);
            seed_reps.insert(f);
            flow(l, f);
            info.kill_target = l;
            implicit_target = l;
        } else if (auto* fw = st.as<FieldWrite>()) {
            RepId f = field_rep(m, fw->object, fw->field);
            seed_reps.insert(f);
            flow(f, var(fw->rhs));
            implicit_target = f; // weak update, no kill
        } else if (auto* r = st.as<Return>()) {
            if (r->value) flow(ret_rep_, var(*r->value));
        } else if (auto* call = st.as<Call>()) {
            CallSite site;
            site.kind = classify_call(prog_, m, *call);
            for (const auto& a : call->args) site.arg_reps.push_back(var(a));
            if (call->return_to) {
                RepId r = var(*call->return_to);
                site.ret_rep = r;
                info.kill_target = r;
                implicit_target = r;
            }
            switch (site.kind) {
            case CallClass::Source: {
                if (site.ret_rep) {
                    flow(*site.ret_rep,
                         sym_rep(prog_.config.sources.at(call->callee)));
                    for (RepId a : site.arg_reps) flow(*site.ret_rep, a);
                }
                break;
            }
            case CallClass::Sink: {
                RepId s = sym_rep(prog_.config.sinks.at(call->callee));
                for (RepId a : site.arg_reps) flow(s, a);
                if (site.ret_rep)
                    for (RepId a : site.arg_reps) flow(*site.ret_rep, a);
                break;
            }
            case CallClass::Pure: break;
            case CallClass::External: {
                if (site.ret_rep)
                    for (RepId a : site.arg_reps) flow(*site.ret_rep, a);
                if (!site.arg_reps.empty())
                    for (size_t i = 1; i < site.arg_reps.size(); ++i)
                        flow(site.arg_reps[0], site.arg_reps[i]);
                break;
            }
            case CallClass::Concrete: {
                bool any_external = false;
                auto targets = detail::resolve_concrete_targets(
                        prog_, m, *call, &any_external);
                for (const Method* t : targets) {
                    int ti = index_of(t->id);
                    if (ti >= 0) site.targets.push_back(ti);
                }
                if (any_external) {
                    // some hierarchy targets have no body: add the library
                    // model on top of the concrete summaries
                    if (site.ret_rep)
                        for (RepId a : site.arg_reps)
                            flow(*site.ret_rep, a);
                    if (!site.arg_reps.empty())
                        for (size_t i = 1; i < site.arg_reps.size(); ++i)
                            flow(site.arg_reps[0], site.arg_reps[i]);
                }
                break;
            }
            }
            info.call = std::move(site);
        }
        // goto / label / cond contribute nothing

        if (implicit_target) {
            auto it = mc.cdeps.find(ni);
            if (it != mc.cdeps.end())
                for (const auto& dep : it->second)
                    flow(*implicit_target, var(dep.cond_var));
        }
        std::sort(info.static_flow.begin(), info.static_flow.end());
        info.static_flow.erase(std::unique(info.static_flow.begin(),
                                           info.static_flow.end()),
                               info.static_flow.end());
    }

    const Program& prog_;
    RepTable reps_;
    ArrayPartition partition_;
    CallGraph call_graph_;
    std::map<MethodId, int> method_index_;
    std::vector<MethodCtx> methods_;
    std::vector<std::vector<int>> callers_;
    std::map<std::string, RepId> var_reps_; // "method\x1fident" -> rep
    std::map<std::string, RepId> sym_reps_;
    RepId ret_rep_ = 0;
};

// ---------------------------------------------------------------------------
// Summary environment: per-method fact sets consulted at call sites.
// During analysis a missing entry reads as the empty set; the checker runs
// in strict mode where a missing entry is a certificate defect.
// ---------------------------------------------------------------------------

class SummaryEnv {
public:
    explicit SummaryEnv(size_t methods, bool strict = false)
            : sets_(methods), present_(methods, false), strict_(strict)
    {
    }

    const FactSet& lookup(const AnalysisContext& ctx, int m) const
    {
        if (!present_[m] && strict_)
            throw CertificateError("certificate has no entry for "
                                   + ctx.id_of(m).str());
        return sets_[m];
    }

    const FactSet& get(int m) const { return sets_[m]; }
    void set(int m, FactSet fs)
    {
        sets_[m] = std::move(fs);
        present_[m] = true;
    }
    bool present(int m) const { return present_[m]; }

private:
    std::vector<FactSet> sets_;
    std::vector<bool> present_;
    bool strict_;
};

namespace detail {

// summary[f] with formals replaced by actuals and ret by the return-to
// variable; pairs mentioning ret in a call that discards the result vanish.
inline void substitute_summary(const AnalysisContext& ctx, const FactSet& summary,
                               const AnalysisContext::CallSite& site,
                               std::vector<Fact>& out)
{
    const RepTable& reps = ctx.reps();
    auto map_rep = [&](RepId r, bool& drop) -> RepId {
        const Representative& rep = reps.rep(r);
        if (rep.kind == Representative::Kind::Param) {
            if (rep.index >= 0
                && rep.index < static_cast<int>(site.arg_reps.size()))
                return site.arg_reps[rep.index];
            drop = true; // arity mismatch in a foreign summary
            return r;
        }
        if (rep.kind == Representative::Kind::Ret) {
            if (site.ret_rep) return *site.ret_rep;
            drop = true;
            return r;
        }
        return r;
    };
    for (Fact f : summary) {
        bool drop = false;
        Fact g{map_rep(f.to, drop), map_rep(f.from, drop)};
        if (!drop) out.push_back(g);
    }
}

} // namespace detail

// Statement-local flow at a CFG node, including implicit control-dependence
// pairs and, for calls, the callee summaries drawn from env.
inline FactSet statement_flow(const AnalysisContext& ctx, int midx, int node,
                              const SummaryEnv& env)
{
    const auto& info = ctx.method_ctx(midx).nodes[node];
    FactSet out;
    for (Fact f : info.static_flow) out.insert(f);
    if (info.call && info.call->kind == CallClass::Concrete) {
        std::vector<Fact> subst;
        for (int t : info.call->targets)
            detail::substitute_summary(ctx, env.lookup(ctx, t), *info.call,
                                       subst);
        for (Fact f : subst) out.insert(f);
    }
    return out;
}

inline FactSet statement_flow(const AnalysisContext& ctx, const MethodId& m,
                              int node, const SummaryEnv& env)
{
    return statement_flow(ctx, ctx.index_of(m), node, env);
}

// Facts invalidated by the statement: everything targeting the variable it
// assigns. Weak updates (field/array writes) and returns kill nothing.
inline FactSet statement_kill(const AnalysisContext& ctx, int midx, int node,
                              const FactSet& d)
{
    const auto& info = ctx.method_ctx(midx).nodes[node];
    FactSet out;
    if (info.kill_target) {
        auto [lo, hi] = d.with_to(*info.kill_target);
        for (auto it = lo; it != hi; ++it) out.insert(*it);
    }
    return out;
}

inline FactSet statement_kill(const AnalysisContext& ctx, const MethodId& m,
                              int node, const FactSet& d)
{
    return statement_kill(ctx, ctx.index_of(m), node, d);
}

namespace detail {

inline FactSet transfer_set(const FactSet& d, const std::vector<Fact>& flow,
                            std::optional<RepId> kill)
{
    FactSet out;
    for (Fact f : flow) {
        auto [lo, hi] = d.with_to(f.from);
        for (auto it = lo; it != hi; ++it) out.insert(Fact{f.to, it->from});
    }
    for (Fact g : d)
        if (!kill || g.to != *kill) out.insert(g);
    return out;
}

} // namespace detail

// F(d, s): transitive extension of d through the statement's flows, plus the
// surviving facts.
inline FactSet transfer(const AnalysisContext& ctx, int midx, int node,
                        const FactSet& d, const SummaryEnv& env)
{
    const auto& info = ctx.method_ctx(midx).nodes[node];
    FactSet flow = statement_flow(ctx, midx, node, env);
    std::vector<Fact> fv(flow.begin(), flow.end());
    return detail::transfer_set(d, fv, info.kill_target);
}

inline FactSet transfer(const AnalysisContext& ctx, const MethodId& m, int node,
                        const FactSet& d, const SummaryEnv& env)
{
    return transfer(ctx, ctx.index_of(m), node, d, env);
}

// Library model for a body-less callee that is neither source, sink nor
// allow-listed: the result depends on receiver and arguments, the receiver
// on the arguments.
inline FactSet library_flow(const AnalysisContext& ctx, const MethodId& caller,
                            int node)
{
    int midx = ctx.index_of(caller);
    const auto& info = ctx.method_ctx(midx).nodes[node];
    if (!info.call || info.call->kind != CallClass::External)
        throw AnalysisError("node is not an external call");
    FactSet out;
    for (Fact f : info.static_flow) out.insert(f);
    return out;
}

// ---------------------------------------------------------------------------
// summarise: forward worklist fixpoint over the method's CFG (processing in
// reverse postorder, ties by node id). IN[init] holds identity facts for
// every l-value of the method plus all source/sink symbols; the result is
// OUT[final].
// ---------------------------------------------------------------------------

inline FactSet summarise(const AnalysisContext& ctx, int midx,
                         const SummaryEnv& env, AnalysisStats* stats = nullptr)
{
    const auto& mc = ctx.method_ctx(midx);
    const size_t n = mc.cfg.size();
    if (stats) ++stats->summarise_calls;

    FactSet seed;
    for (Fact f : mc.seeds) seed.insert(f);
    if (n == 1 && !mc.cfg.stmt(0)) return seed; // empty body

    // per-invocation cache of substituted call flows (env is frozen here)
    std::vector<std::optional<std::vector<Fact>>> flow_cache(n);
    auto node_flow = [&](int node) -> const std::vector<Fact>& {
        auto& slot = flow_cache[node];
        if (!slot) {
            const auto& info = mc.nodes[node];
            std::vector<Fact> fv = info.static_flow;
            if (info.call && info.call->kind == CallClass::Concrete) {
                for (int t : info.call->targets)
                    detail::substitute_summary(ctx, env.lookup(ctx, t),
                                               *info.call, fv);
                std::sort(fv.begin(), fv.end());
                fv.erase(std::unique(fv.begin(), fv.end()), fv.end());
            }
            slot = std::move(fv);
        }
        return *slot;
    };

    std::vector<FactSet> out(n);
    std::set<int> worklist; // rpo positions
    if (mc.rpo_index[mc.cfg.init] >= 0) worklist.insert(mc.rpo_index[mc.cfg.init]);

    while (!worklist.empty()) {
        int pos = *worklist.begin();
        worklist.erase(worklist.begin());
        int node = mc.rpo[pos];

        FactSet in;
        if (node == mc.cfg.init) in = seed;
        for (int p : mc.cfg.pred[node]) in.merge(out[p]);

        FactSet next = detail::transfer_set(in, node_flow(node),
                                            mc.nodes[node].kill_target);
        if (stats) ++stats->node_evals;
        if (next != out[node]) {
            out[node] = std::move(next);
            for (int s : mc.cfg.succ[node])
                if (mc.rpo_index[s] >= 0) worklist.insert(mc.rpo_index[s]);
        }
    }
    return out[mc.cfg.final];
}

inline FactSet summarise(const AnalysisContext& ctx, const MethodId& m,
                         const SummaryEnv& env, AnalysisStats* stats = nullptr)
{
    int i = ctx.index_of(m);
    if (i < 0) throw AnalysisError("unknown method " + m.str());
    return summarise(ctx, i, env, stats);
}

// Drops pairs that mention a local variable of the summarized method and
// reflexive pairs; identities are re-seeded by every consumer anyway.
inline FactSet filter_summary(const AnalysisContext& ctx, const FactSet& fs)
{
    FactSet out;
    for (Fact f : fs) {
        if (f.to == f.from) continue;
        if (ctx.is_local_var(f.to) || ctx.is_local_var(f.from)) continue;
        out.insert(f);
    }
    return out;
}

}

#endif
