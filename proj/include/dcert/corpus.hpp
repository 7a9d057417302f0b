#ifndef DCERT_CORPUS_HPP
#define DCERT_CORPUS_HPP

// Synthetic program generation and a concrete taint interpreter.
//
// generate() emits programs with a spine of methods threading a
// source-derived value from a leaf back to a sinking root, pad methods for
// bulk, and optional field/array hops, tainted branches and a dispatched
// call pair. dyn_taint_run() executes a program with labels attached to
// values; sources mint labels, operations union them, assignments under a
// conditional absorb the condition's labels, sinks record what reached
// them. Both are deterministic.

#include "dcert/certify.hpp"
#include "dcert/dataflow.hpp"
#include "dcert/graphs.hpp"
#include "dcert/ir.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dcert {

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

struct GenSpec {
    int method_count = 12;
    int call_chain_depth = 3;  // spine edges; spine has depth+1 methods
    int fan_out = 2;           // callees per non-leaf method
    int stmts_per_method = 8;  // padding target
    double branch_density = 0.3;
    double array_field_density = 0.3;
    std::uint64_t seed = 1;
};

struct GeneratedProgram {
    std::string ir_text;
    std::string config_text;
};

namespace detail {

// engine() % n, pinned here so generated corpora do not depend on the
// standard library's distribution implementations
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n)
{
    return n == 0 ? 0 : rng() % n;
}

inline bool chance(std::mt19937_64& rng, double density)
{
    if (density <= 0.0) return false;
    if (density >= 1.0) return true;
    return bounded(rng, 1000) < static_cast<std::uint64_t>(density * 1000.0);
}

} // namespace detail

inline GeneratedProgram generate(const GenSpec& spec)
{
    if (spec.method_count < 1 || spec.call_chain_depth < 0
        || spec.fan_out < 1 || spec.stmts_per_method < 1)
        throw Error("infeasible generator spec: counts must be positive");
    if (spec.method_count > 2000000 || spec.fan_out > 64
        || spec.call_chain_depth > spec.method_count)
        throw Error("infeasible generator spec: size bounds exceeded");
    if (spec.method_count < spec.call_chain_depth + 1)
        throw Error("infeasible generator spec: method_count must cover the "
                    "call chain");

    std::mt19937_64 rng(spec.seed);
    const int spine = spec.call_chain_depth + 1;
    int remaining = spec.method_count - spine;
    const bool with_dispatch_pair = remaining >= 2;
    if (with_dispatch_pair) remaining -= 2;
    const int pads = remaining;
    // trailing block of pads stays call-free so pad chains have depth 2
    const int leaf_block =
            pads == 0 ? 0 : std::min(pads, std::max(spec.fan_out, 2));
    const int inner_pads = pads - leaf_block;

    std::ostringstream ir;
    std::ostringstream body;

    auto pad_name = [](int j) { return "pad" + std::to_string(j); };
    auto pad_is_leaf = [&](int j) { return j >= inner_pads; };

    int pad_rr = 0; // round-robin cursor for spine -> pad calls
    auto next_pad = [&]() {
        int j = pad_rr % pads;
        pad_rr++;
        return j;
    };

    ir << "class Gen {\n";
    for (int f = 0; f < 4; ++f) ir << "  field f" << f << ": String\n";

    // spine: s0 (entry, sinks) .. s<depth> (leaf, reads the source)
    for (int i = 0; i < spine; ++i) {
        const bool leaf = i == spine - 1;
        body.str("");
        int stmts = 0;
        auto emit = [&](const std::string& line) {
            body << "    " << line << "\n";
            ++stmts;
        };

        if (leaf) {
            emit("t0 := call Env.secret/0()");
            emit("c0 := call Env.clock/0()"); // read but never propagated
        } else {
            emit("t0 := call Gen.s" + std::to_string(i + 1) + "/1(this)");
        }

        // hop the tainted value through a field or an array occasionally
        std::string cur = "t0";
        if (detail::chance(rng, spec.array_field_density)) {
            if (detail::bounded(rng, 2) == 0) {
                std::string f = "f" + std::to_string(i % 4);
                emit("this." + f + " := " + cur);
                emit("t1 := this." + f);
            } else {
                emit("a0 := call Env.newarr/0()");
                emit("ix := const " + std::to_string(i));
                emit("a0[ix] := " + cur);
                emit("t1 := a0[ix]");
            }
            cur = "t1";
        }

        // branch on a taint-derived integer
        if (detail::chance(rng, spec.branch_density)) {
            emit("bi := call Env.taintlen/1(" + cur + ")");
            emit("u0 := const 0");
            emit("if bi > 0 goto Lb" + std::to_string(i));
            emit("u0 := " + cur);
            emit("label Lb" + std::to_string(i));
        }

        if (!leaf) {
            for (int k = 0; k + 1 < spec.fan_out && pads > 0; ++k)
                emit("w" + std::to_string(k) + " := call Gen."
                     + pad_name(next_pad()) + "/2(this, " + cur + ")");
        }
        if (i == 0 && with_dispatch_pair) {
            emit("hb := call Mix.pick/0()");
            emit("hm := call GenBase.mix/2(hb, " + cur + ")");
        }
        if (i == 0) {
            emit("sn := call Net.open/0()");
            emit("call Net.send/2(sn, " + cur + ")");
            emit("k0 := const \"k\"");
            emit("call Net.send/2(sn, k0)");
        }
        for (int q = 0; stmts + 1 < spec.stmts_per_method; ++q)
            emit("z" + std::to_string(q) + " := const "
                 + std::to_string(static_cast<int>(detail::bounded(rng, 97))));
        emit("return " + cur);

        ir << "  method s" << i << "/1(this: Gen) -> String {\n"
           << body.str() << "  }\n";
    }

    // pads: inner pads call into the leaf block, the leaf block is call-free
    for (int j = 0; j < pads; ++j) {
        body.str("");
        int stmts = 0;
        auto emit = [&](const std::string& line) {
            body << "    " << line << "\n";
            ++stmts;
        };
        emit("y0 := x");
        std::string cur = "y0";
        if (detail::chance(rng, spec.array_field_density)) {
            std::string f = "f" + std::to_string(j % 4);
            emit("this." + f + " := " + cur);
            emit("y1 := this." + f);
            cur = "y1";
        }
        if (detail::chance(rng, spec.branch_density)) {
            emit("pb := const " + std::to_string(static_cast<int>(
                         detail::bounded(rng, 3))));
            emit("if pb > 0 goto Lp" + std::to_string(j));
            emit("y2 := " + cur);
            emit("label Lp" + std::to_string(j));
            emit("y3 := call Env.scrub/1(" + cur + ")");
        }
        if (!pad_is_leaf(j)) {
            for (int k = 0; k < spec.fan_out; ++k) {
                int target = inner_pads
                             + static_cast<int>((static_cast<long long>(j)
                                                         * spec.fan_out
                                                 + k)
                                                % leaf_block);
                emit("q" + std::to_string(k) + " := call Gen."
                     + pad_name(target) + "/2(this, " + cur + ")");
            }
        }
        for (int q = 0; stmts + 1 < spec.stmts_per_method; ++q)
            emit("z" + std::to_string(q) + " := const "
                 + std::to_string(static_cast<int>(detail::bounded(rng, 97))));
        emit("return " + cur);

        ir << "  method " << pad_name(j)
           << "/2(this: Gen, x: String) -> String {\n"
           << body.str() << "  }\n";
    }
    ir << "}\n";

    if (with_dispatch_pair) {
        ir << "class GenBase {\n"
           << "  field bf: String\n"
           << "  method mix/2(this: GenBase, x: String) -> String {\n"
           << "    y := x\n"
           << "    return y\n"
           << "  }\n"
           << "}\n"
           << "class GenSub extends GenBase {\n"
           << "  method mix/2(this: GenSub, x: String) -> String {\n"
           << "    this.bf := x\n"
           << "    z := this.bf\n"
           << "    return z\n"
           << "  }\n"
           << "}\n"
           << "extern class Mix {\n"
           << "  method pick/0() -> GenBase\n"
           << "}\n";
    }

    ir << "extern class Env {\n"
       << "  method secret/0() -> String\n"
       << "  method clock/0() -> String\n"
       << "  method taintlen/1(x: String) -> Int\n"
       << "  method newarr/0() -> Arr\n"
       << "  method scrub/1(x: String) -> String\n"
       << "}\n"
       << "extern class Net {\n"
       << "  method open/0() -> Net\n"
       << "  method send/2(this: Net, x: String) -> void\n"
       << "}\n";

    GeneratedProgram out;
    out.ir_text = ir.str();
    out.config_text = "source Env.secret/0 secret\n"
                      "source Env.clock/0 clock\n"
                      "sink Net.send/2 net\n"
                      "pure Env.scrub/1\n"
                      "entry Gen.s0/1\n";
    return out;
}

// ---------------------------------------------------------------------------
// Dynamic taint interpreter
// ---------------------------------------------------------------------------

struct DynTrace {
    // flows observed for the run, attributed to the entry method:
    // ("sym:<sink>", "sym:<source>") for sink hits, ("ret", "sym:<source>")
    // for labels on the entry's return value
    std::set<std::pair<std::string, std::string>> flows;
    std::set<std::pair<MethodId, MethodId>> call_edges;
    size_t steps = 0;
};

namespace detail {

struct DynValue {
    enum class Kind { Unit, Int, Str, Obj, Arr };
    Kind kind = Kind::Unit;
    std::int64_t i = 0;
    std::string s;
    size_t ref = 0;
    std::set<std::string> labels;
};

class Interpreter {
public:
    Interpreter(const Program& p, size_t budget) : prog_(p), budget_(budget) {}

    DynTrace run(const MethodId& entry)
    {
        const Method* m = prog_.find_method(entry);
        if (!m) throw Error("unknown entry method " + entry.str());
        std::vector<DynValue> args;
        for (const auto& pa : m->params) args.push_back(fresh(pa.type));
        DynValue result = exec(*m, args);
        for (const auto& l : result.labels)
            trace_.flows.emplace("ret", "sym:" + l);
        trace_.steps = steps_;
        return trace_;
    }

private:
    struct ObjRec {
        std::string cls;
        std::map<std::string, DynValue> fields;
    };
    struct ArrRec {
        std::map<std::int64_t, DynValue> slots;
    };

    struct MethodInfo {
        Cfg cfg;
        ControlDeps cdeps;
        std::map<std::string, int> labels;
        std::vector<int> node_of_location;
    };

    const MethodInfo& info(const Method& m)
    {
        auto it = infos_.find(m.id);
        if (it != infos_.end()) return it->second;
        MethodInfo mi;
        mi.cfg = build_cfg(m);
        mi.cdeps = control_dependencies(mi.cfg);
        mi.node_of_location.assign(m.body.size(), -1);
        for (size_t n = 0; n < mi.cfg.size(); ++n)
            if (mi.cfg.nodes[n].location >= 0)
                mi.node_of_location[mi.cfg.nodes[n].location] =
                        static_cast<int>(n);
        for (size_t i = 0; i < m.body.size(); ++i)
            if (auto* l = m.body[i].as<LabelStmt>())
                mi.labels[l->name] = static_cast<int>(i);
        return infos_.emplace(m.id, std::move(mi)).first->second;
    }

    DynValue fresh(const std::string& type)
    {
        DynValue v;
        if (type == "Int") {
            v.kind = DynValue::Kind::Int;
        } else if (type == "String") {
            v.kind = DynValue::Kind::Str;
        } else if (type == "Arr") {
            v.kind = DynValue::Kind::Arr;
            v.ref = arrays_.size();
            arrays_.emplace_back();
        } else if (type == "void" || type.empty()) {
            v.kind = DynValue::Kind::Unit;
        } else {
            v.kind = DynValue::Kind::Obj;
            v.ref = objects_.size();
            objects_.push_back(ObjRec{type, {}});
        }
        return v;
    }

    void tick(const Method& m, int line)
    {
        if (++steps_ > budget_)
            throw Error("step budget exhausted in " + m.id.str() + " at line "
                        + std::to_string(line));
    }

    using Frame = std::map<std::string, DynValue>;

    DynValue& slot(Frame& f, const std::string& id) { return f[id]; }

    std::set<std::string> implicit_labels(const MethodInfo& mi, Frame& frame,
                                          int body_index)
    {
        std::set<std::string> out;
        if (body_index < 0
            || body_index >= static_cast<int>(mi.node_of_location.size()))
            return out;
        int node = mi.node_of_location[body_index];
        if (node < 0) return out;
        auto it = mi.cdeps.find(node);
        if (it == mi.cdeps.end()) return out;
        for (const auto& dep : it->second) {
            auto fit = frame.find(dep.cond_var);
            if (fit != frame.end())
                out.insert(fit->second.labels.begin(),
                           fit->second.labels.end());
        }
        return out;
    }

    DynValue exec(const Method& m, std::vector<DynValue> args)
    {
        const MethodInfo& mi = info(m);
        Frame frame;
        for (size_t i = 0; i < m.params.size(); ++i)
            frame[m.params[i].name] = std::move(args[i]);

        int pc = 0;
        const auto& body = m.body;
        while (pc >= 0 && pc < static_cast<int>(body.size())) {
            const Stmt& st = body[pc];
            tick(m, st.line);

            auto store = [&](const std::string& lhs, DynValue v) {
                auto extra = implicit_labels(mi, frame, pc);
                v.labels.insert(extra.begin(), extra.end());
                frame[lhs] = std::move(v);
            };

            if (auto* c = st.as<ConstAssign>()) {
                DynValue v;
                if (std::holds_alternative<std::int64_t>(c->value)) {
                    v.kind = DynValue::Kind::Int;
                    v.i = std::get<std::int64_t>(c->value);
                } else {
                    v.kind = DynValue::Kind::Str;
                    v.s = std::get<std::string>(c->value);
                }
                store(c->lhs, std::move(v));
            } else if (auto* c = st.as<Copy>()) {
                store(c->lhs, frame[c->rhs]);
            } else if (auto* u = st.as<UnaryOp>()) {
                DynValue a = frame[u->rhs];
                require_int(m, st, a);
                DynValue v;
                v.kind = DynValue::Kind::Int;
                v.i = u->op == UnOp::Neg ? -a.i : (a.i == 0 ? 1 : 0);
                v.labels = a.labels;
                store(u->lhs, std::move(v));
            } else if (auto* b = st.as<BinaryOp>()) {
                DynValue a1 = frame[b->rhs1];
                DynValue a2 = frame[b->rhs2];
                require_int(m, st, a1);
                require_int(m, st, a2);
                DynValue v;
                v.kind = DynValue::Kind::Int;
                v.i = eval_bin(b->op, a1.i, a2.i);
                v.labels = a1.labels;
                v.labels.insert(a2.labels.begin(), a2.labels.end());
                store(b->lhs, std::move(v));
            } else if (auto* ar = st.as<ArrayRead>()) {
                DynValue& a = frame[ar->array];
                if (a.kind != DynValue::Kind::Arr)
                    throw Error(type_error(m, st, "array"));
                DynValue idx = frame[ar->index];
                require_int(m, st, idx);
                auto& slots = arrays_[a.ref].slots;
                DynValue v = slots.count(idx.i) ? slots[idx.i] : DynValue{};
                store(ar->lhs, std::move(v));
            } else if (auto* aw = st.as<ArrayWrite>()) {
                DynValue& a = frame[aw->array];
                if (a.kind != DynValue::Kind::Arr)
                    throw Error(type_error(m, st, "array"));
                DynValue v = frame[aw->rhs];
                auto extra = implicit_labels(mi, frame, pc);
                v.labels.insert(extra.begin(), extra.end());
                DynValue idx = frame[aw->index];
                require_int(m, st, idx);
                arrays_[a.ref].slots[idx.i] = std::move(v);
            } else if (auto* fr = st.as<FieldRead>()) {
                DynValue& o = frame[fr->object];
                if (o.kind != DynValue::Kind::Obj)
                    throw Error(type_error(m, st, "object"));
                auto& fields = objects_[o.ref].fields;
                DynValue v = fields.count(fr->field) ? fields[fr->field]
                                                     : DynValue{};
                store(fr->lhs, std::move(v));
            } else if (auto* fw = st.as<FieldWrite>()) {
                DynValue& o = frame[fw->object];
                if (o.kind != DynValue::Kind::Obj)
                    throw Error(type_error(m, st, "object"));
                DynValue v = frame[fw->rhs];
                auto extra = implicit_labels(mi, frame, pc);
                v.labels.insert(extra.begin(), extra.end());
                objects_[o.ref].fields[fw->field] = std::move(v);
            } else if (auto* call = st.as<Call>()) {
                DynValue result = do_call(m, st, *call, frame);
                if (call->return_to) store(*call->return_to, std::move(result));
            } else if (auto* r = st.as<Return>()) {
                return r->value ? frame[*r->value] : DynValue{};
            } else if (auto* g = st.as<Goto>()) {
                pc = mi.labels.at(g->label);
                continue;
            } else if (st.is<LabelStmt>()) {
                // no effect
            } else if (auto* cg = st.as<CondGoto>()) {
                DynValue v = frame[cg->var];
                require_int(m, st, v);
                bool taken = cg->op == CondOp::Gt0   ? v.i > 0
                             : cg->op == CondOp::Lt0 ? v.i < 0
                                                     : v.i == 0;
                if (taken) {
                    pc = mi.labels.at(cg->label);
                    continue;
                }
            }
            ++pc;
        }
        return DynValue{}; // void fall-through cannot happen post-parse
    }

    static std::int64_t eval_bin(BinOp op, std::int64_t a, std::int64_t b)
    {
        switch (op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Div: return b == 0 ? 0 : a / b;
        case BinOp::Rem: return b == 0 ? 0 : a % b;
        case BinOp::And: return a & b;
        case BinOp::Or: return a | b;
        case BinOp::Xor: return a ^ b;
        case BinOp::Cmp: return a < b ? -1 : (a == b ? 0 : 1);
        }
        return 0;
    }

    void require_int(const Method& m, const Stmt& st, const DynValue& v)
    {
        if (v.kind != DynValue::Kind::Int && v.kind != DynValue::Kind::Unit)
            throw Error(type_error(m, st, "integer"));
    }

    std::string type_error(const Method& m, const Stmt& st, const char* what)
    {
        return "runtime type error: expected " + std::string(what) + " in "
               + m.id.str() + " at line " + std::to_string(st.line);
    }

    std::set<std::string> arg_labels(const std::vector<DynValue>& args)
    {
        std::set<std::string> out;
        for (const auto& a : args)
            out.insert(a.labels.begin(), a.labels.end());
        return out;
    }

    DynValue do_call(const Method& caller, const Stmt& st, const Call& call,
                     Frame& frame)
    {
        std::vector<DynValue> args;
        for (const auto& a : call.args) args.push_back(frame[a]);
        const auto& cfg = prog_.config;

        if (cfg.is_source(call.callee)) {
            const Method* decl = prog_.find_declaration(call.callee);
            DynValue v = fresh(decl ? decl->return_type : "String");
            v.labels = arg_labels(args);
            v.labels.insert(cfg.sources.at(call.callee));
            return v;
        }
        if (cfg.is_sink(call.callee)) {
            const std::string& sym = cfg.sinks.at(call.callee);
            for (const auto& l : arg_labels(args))
                trace_.flows.emplace("sym:" + sym, "sym:" + l);
            const Method* decl = prog_.find_declaration(call.callee);
            DynValue v = fresh(decl ? decl->return_type : "void");
            v.labels = arg_labels(args);
            return v;
        }
        if (cfg.is_pure(call.callee)) {
            const Method* decl = prog_.find_declaration(call.callee);
            return fresh(decl ? decl->return_type : "void");
        }

        // dispatch on the receiver's runtime class when there is one
        std::string runtime_cls = call.callee.cls();
        if (!args.empty() && args[0].kind == DynValue::Kind::Obj)
            runtime_cls = objects_[args[0].ref].cls;
        const Method* target = detail::lookup_in_chain(
                prog_, runtime_cls, call.callee.name(), call.callee.arity());
        if (!target)
            target = prog_.find_declaration(call.callee);
        if (!target)
            throw Error("call to unknown method " + call.callee.str());

        if (target->external) {
            // library model: result from arguments, receiver from arguments
            DynValue v = fresh(target->return_type);
            v.labels = arg_labels(args);
            if (call.args.size() > 1) {
                std::set<std::string> tail;
                for (size_t i = 1; i < args.size(); ++i)
                    tail.insert(args[i].labels.begin(), args[i].labels.end());
                auto& recv = frame[call.args[0]];
                recv.labels.insert(tail.begin(), tail.end());
            }
            return v;
        }

        trace_.call_edges.emplace(caller.id, target->id);
        (void)st;
        return exec(*target, std::move(args));
    }

    const Program& prog_;
    size_t budget_;
    size_t steps_ = 0;
    std::vector<ObjRec> objects_;
    std::vector<ArrRec> arrays_;
    std::map<MethodId, MethodInfo> infos_;
    DynTrace trace_;
};

} // namespace detail

inline DynTrace dyn_taint_run(const Program& p, const MethodId& entry,
                              size_t budget = 1000000)
{
    detail::Interpreter interp(p, budget);
    return interp.run(entry);
}

}

#endif
