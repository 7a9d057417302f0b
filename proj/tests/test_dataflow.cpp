#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace dcert;
using testutil::load_fixture;
using testutil::make_facts;
using testutil::pairs_of;
using testutil::Pairs;

namespace {

// One straight-line method holding every statement row at a fixed node
// index; no branches, so flows carry no control-dependence pairs.
const char* kTableText =
        "class Tab {\n"
        "  field fld: Int\n"
        "  method obj/1(this: Tab) -> Tab {\n"
        "    return this\n"
        "  }\n"
        "  method arr0/1(this: Tab) -> Arr {\n"
        "    a := call X.newarr/0()\n"
        "    return a\n"
        "  }\n"
        "  method callee/2(this: Tab, u: Int) -> Int {\n"
        "    v := u\n"
        "    return v\n"
        "  }\n"
        "  method m/3(this: Tab, y: Int, z: Int) -> Int {\n"
        "    x := const 5\n"          // 0  const
        "    x := y\n"                // 1  copy
        "    x := neg y\n"            // 2  unary
        "    x := y add z\n"          // 3  binary
        "    o := call Tab.obj/1(this)\n"   // 4
        "    a := call Tab.arr0/1(this)\n"  // 5
        "    i := const 0\n"          // 6
        "    x := o.fld\n"            // 7  field read
        "    x := a[i]\n"             // 8  array read
        "    o.fld := x\n"            // 9  field write
        "    a[i] := x\n"             // 10 array write
        "    r := call Tab.callee/2(this, y)\n" // 11 call
        "    if x > 0 goto L\n"       // 12 cond
        "    goto L\n"                // 13 goto
        "    label L\n"               // 14 label
        "    return x\n"              // 15 return
        "  }\n"
        "}\n"
        "extern class X { method newarr/0() -> Arr }\n";

struct TableFixture {
    Program program;
    AnalysisContext ctx;
    MethodId m = MethodId::parse("Tab.m/3");
    SummaryEnv env;

    TableFixture()
            : program(parse_program(kTableText, "")), ctx(program),
              env(ctx.method_count())
    {
        // pin the callee summary so the call row is deterministic
        env.set(ctx.index_of(MethodId::parse("Tab.callee/2")),
                make_facts(ctx, {{"ret", "p:1"}}));
    }

    Pairs flow_at(int node) { return pairs_of(ctx, statement_flow(ctx, m, node, env)); }
    Pairs kill_at(int node, const FactSet& d)
    {
        return pairs_of(ctx, statement_kill(ctx, m, node, d));
    }
};

const char* X = "v:Tab.m/3::x";
const char* O = "v:Tab.m/3::o";
const char* A_ARR = "arr:v:Tab.arr0/1::a";
const char* R = "v:Tab.m/3::r";

} // namespace

TEST_CASE("flow and kill match the statement table row by row")
{
    TableFixture t;
    FactSet d = make_facts(t.ctx, {{X, "v:Tab.m/3::t"}, {"v:Tab.m/3::w", "p:1"}});

    SECTION("const")
    {
        CHECK(t.flow_at(0) == Pairs{});
        CHECK(t.kill_at(0, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("copy")
    {
        CHECK(t.flow_at(1) == Pairs{{X, "p:1"}});
        CHECK(t.kill_at(1, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("unary")
    {
        CHECK(t.flow_at(2) == Pairs{{X, "p:1"}});
        CHECK(t.kill_at(2, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("binary")
    {
        CHECK(t.flow_at(3) == Pairs{{X, "p:1"}, {X, "p:2"}});
        CHECK(t.kill_at(3, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("field read")
    {
        CHECK(t.flow_at(7) == Pairs{{X, "f:Tab.fld"}});
        CHECK(t.kill_at(7, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("array read")
    {
        CHECK(t.flow_at(8) == Pairs{{X, A_ARR}});
        CHECK(t.kill_at(8, d) == Pairs{{X, "v:Tab.m/3::t"}});
    }
    SECTION("field write kills nothing")
    {
        CHECK(t.flow_at(9) == Pairs{{"f:Tab.fld", X}});
        CHECK(t.kill_at(9, d) == Pairs{});
    }
    SECTION("array write kills nothing")
    {
        CHECK(t.flow_at(10) == Pairs{{A_ARR, X}});
        CHECK(t.kill_at(10, d) == Pairs{});
    }
    SECTION("call substitutes formals and ret")
    {
        CHECK(t.flow_at(11) == Pairs{{R, "p:1"}});
        FactSet dr = make_facts(t.ctx, {{R, "p:1"}, {X, "p:2"}});
        CHECK(t.kill_at(11, dr) == Pairs{{R, "p:1"}});
    }
    SECTION("cond, goto and label are inert")
    {
        for (int node : {12, 13, 14}) {
            CHECK(t.flow_at(node) == Pairs{});
            CHECK(t.kill_at(node, d) == Pairs{});
        }
    }
    SECTION("return flows into ret and kills nothing")
    {
        CHECK(t.flow_at(15) == Pairs{{"ret", X}});
        CHECK(t.kill_at(15, d) == Pairs{});
    }
}

TEST_CASE("transfer reproduces the worked example")
{
    TableFixture t;
    // F({(x,t), (y,p)}, x := y + z) = {(x,p), (y,p)}
    FactSet d = make_facts(t.ctx, {{X, "v:Tab.m/3::t"}, {"p:1", "v:Tab.m/3::p"}});
    FactSet out = transfer(t.ctx, t.m, 3, d, t.env);
    CHECK(pairs_of(t.ctx, out)
          == Pairs{{X, "v:Tab.m/3::p"}, {"p:1", "v:Tab.m/3::p"}});
}

TEST_CASE("transfer is the identity on conditionals")
{
    TableFixture t;
    FactSet d = make_facts(t.ctx, {{X, "p:1"}, {"f:Tab.fld", "p:2"}});
    CHECK(transfer(t.ctx, t.m, 12, d, t.env) == d);
}

TEST_CASE("transfer composes through the incoming facts only")
{
    TableFixture t;
    FactSet empty;
    CHECK(transfer(t.ctx, t.m, 1, empty, t.env).empty());

    FactSet idy = make_facts(t.ctx, {{"p:1", "p:1"}});
    CHECK(pairs_of(t.ctx, transfer(t.ctx, t.m, 1, idy, t.env))
          == Pairs{{X, "p:1"}, {"p:1", "p:1"}});
}

TEST_CASE("summaries of the flagship methods match the iteration table")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count());

    auto summary = [&](const char* id) {
        return filter_summary(ctx, summarise(ctx, MethodId::parse(id), env));
    };

    FactSet raw = summarise(ctx, MethodId::parse("App.getId/1"), env);
    CHECK(raw.contains(Fact{ctx.ret_rep(), ctx.sym_rep("id")}));
    CHECK(pairs_of(ctx, summary("App.getId/1")) == Pairs{{"ret", "sym:id"}});
    CHECK(pairs_of(ctx, summary("App.Send/2")) == Pairs{{"sym:sms", "p:1"}});
    CHECK(pairs_of(ctx, summary("App.getNumber/1"))
          == Pairs{{"ret", "sym:num"}});

    // with first-round callee summaries in place, bar resolves completely
    env.set(ctx.index_of(MethodId::parse("App.getId/1")),
            make_facts(ctx, {{"ret", "sym:id"}}));
    env.set(ctx.index_of(MethodId::parse("App.Send/2")),
            make_facts(ctx, {{"sym:sms", "p:1"}}));
    env.set(ctx.index_of(MethodId::parse("App.getNumber/1")),
            make_facts(ctx, {{"ret", "sym:num"}}));
    CHECK(pairs_of(ctx, summary("App.bar/1"))
          == Pairs{{"ret", "sym:num"}, {"sym:sms", "sym:id"}});
}

TEST_CASE("summarising an empty void method leaves only identity facts")
{
    Program p = parse_program("class T { method e/1(this: T) -> void {} }",
                              "source S.s/0 tag");
    AnalysisContext ctx(p);
    SummaryEnv env(ctx.method_count());
    FactSet raw = summarise(ctx, MethodId::parse("T.e/1"), env);
    for (Fact f : raw) CHECK(f.to == f.from);
    CHECK(raw.contains(Fact{ctx.sym_rep("tag"), ctx.sym_rep("tag")}));
    CHECK(filter_summary(ctx, raw).empty());
}

TEST_CASE("identity facts seed every source and sink symbol")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count());
    FactSet raw = summarise(ctx, MethodId::parse("App.foo/1"), env);
    for (const char* sym : {"id", "num", "sms"})
        CHECK(raw.contains(Fact{ctx.sym_rep(sym), ctx.sym_rep(sym)}));
}

TEST_CASE("source calls flow their symbol and their arguments to the result")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count());
    // getId node 1: x := call TelephonyManager.getDeviceId/1(tm)
    Pairs flow = pairs_of(
            ctx, statement_flow(ctx, MethodId::parse("App.getId/1"), 1, env));
    CHECK(flow
          == Pairs{{"v:App.getId/1::x", "sym:id"},
                   {"v:App.getId/1::x", "v:App.getId/1::tm"}});
}

TEST_CASE("sink calls flow every argument into the sink symbol")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count());
    // Send node 2: call SmsManager.sendTextMessage/5(SM, num, num, x, num)
    Pairs flow = pairs_of(
            ctx, statement_flow(ctx, MethodId::parse("App.Send/2"), 2, env));
    CHECK(flow.count({"sym:sms", "p:1"}) == 1);
    CHECK(flow.count({"sym:sms", "v:App.Send/2::SM"}) == 1);
    CHECK(flow.count({"sym:sms", "v:App.Send/2::num"}) == 1);
    CHECK(flow.size() == 3);
}

TEST_CASE("library calls model results and receivers from arguments")
{
    auto fx = load_fixture("libmodel");
    AnalysisContext ctx(fx.program);
    MethodId go = MethodId::parse("Uses.go/1");

    // sb2 := call SB.append/2(sb, s)
    Pairs appended = pairs_of(ctx, library_flow(ctx, go, 2));
    CHECK(appended
          == Pairs{{"v:Uses.go/1::sb2", "v:Uses.go/1::sb"},
                   {"v:Uses.go/1::sb2", "v:Uses.go/1::s"},
                   {"v:Uses.go/1::sb", "v:Uses.go/1::s"}});

    // receiver-only call without a result binds nothing
    Program p = parse_program(
            "class T {\n"
            "  method m/1(this: T) -> void {\n"
            "    call Ext.touch/1(this)\n"
            "    return\n"
            "  }\n"
            "}\n"
            "extern class Ext { method touch/1(this: T) -> void }\n",
            "");
    AnalysisContext ctx2(p);
    CHECK(library_flow(ctx2, MethodId::parse("T.m/1"), 0).empty());
}

TEST_CASE("allow-listed calls are pure")
{
    Program p = parse_program(
            "class T {\n"
            "  method m/2(this: T, s: String) -> String {\n"
            "    x := call Ext.scrub/1(s)\n"
            "    return x\n"
            "  }\n"
            "}\n"
            "extern class Ext { method scrub/1(s: String) -> String }\n",
            "pure Ext.scrub/1");
    AnalysisContext ctx(p);
    SummaryEnv env(ctx.method_count());
    CHECK(statement_flow(ctx, MethodId::parse("T.m/2"), 0, env).empty());
    // the call still kills its result, so nothing flows into ret
    CHECK(pairs_of(ctx, filter_summary(
                                ctx, summarise(ctx, MethodId::parse("T.m/2"),
                                               env)))
          == Pairs{});
}

TEST_CASE("assignments under a branch absorb the condition variable")
{
    auto fx = load_fixture("implicit");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count());
    MethodId main = MethodId::parse("Imp.main/1");

    // node 4 is `y := z` guarded by `if x > 0`
    CHECK(pairs_of(ctx, statement_flow(ctx, main, 4, env))
          == Pairs{{"v:Imp.main/1::y", "v:Imp.main/1::z"},
                   {"v:Imp.main/1::y", "v:Imp.main/1::x"}});

    FactSet result = filter_summary(ctx, summarise(ctx, main, env));
    CHECK(pairs_of(ctx, result)
          == Pairs{{"ret", "sym:inp"},
                   {"sym:out", "p:0"},
                   {"sym:out", "sym:inp"}});
}

TEST_CASE("guarded constant assignments depend on the condition too")
{
    Program p = parse_program(testutil::one_method(
            "if x > 0 goto L\ny := const 1\nlabel L\nreturn y",
            "this: T, x: Int"));
    AnalysisContext ctx(p);
    SummaryEnv env(ctx.method_count());
    CHECK(pairs_of(ctx, statement_flow(ctx, MethodId::parse("T.m/2"), 1, env))
          == Pairs{{"v:T.m/2::y", "v:T.m/2::x"}});
}

TEST_CASE("transfer is monotone for every statement kind")
{
    TableFixture t;
    std::mt19937_64 rng(7);
    std::vector<std::string> universe{X,    O,     R,          "p:0",
                                      "p:1", "p:2", "f:Tab.fld", A_ARR,
                                      "ret", "v:Tab.m/3::i"};
    for (int trial = 0; trial < 40; ++trial) {
        // random d' and a random subset d of it
        std::vector<std::pair<std::string, std::string>> big;
        for (int k = 0; k < 8; ++k)
            big.emplace_back(universe[rng() % universe.size()],
                             universe[rng() % universe.size()]);
        std::vector<std::pair<std::string, std::string>> small;
        for (const auto& pr : big)
            if (rng() % 2) small.push_back(pr);
        FactSet dprime = make_facts(t.ctx, big);
        FactSet d = make_facts(t.ctx, small);
        for (int node = 0; node <= 15; ++node) {
            FactSet lo = transfer(t.ctx, t.m, node, d, t.env);
            FactSet hi = transfer(t.ctx, t.m, node, dprime, t.env);
            CAPTURE(trial, node);
            CHECK(lo.subset_of(hi));
        }
    }
}

TEST_CASE("summarise is monotone in the summary environment")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    MethodId bar = MethodId::parse("App.bar/1");

    SummaryEnv lo(ctx.method_count());
    lo.set(ctx.index_of(MethodId::parse("App.getId/1")),
           make_facts(ctx, {{"ret", "sym:id"}}));

    SummaryEnv hi(ctx.method_count());
    hi.set(ctx.index_of(MethodId::parse("App.getId/1")),
           make_facts(ctx, {{"ret", "sym:id"}}));
    hi.set(ctx.index_of(MethodId::parse("App.Send/2")),
           make_facts(ctx, {{"sym:sms", "p:1"}}));
    hi.set(ctx.index_of(MethodId::parse("App.getNumber/1")),
           make_facts(ctx, {{"ret", "sym:num"}}));

    CHECK(summarise(ctx, bar, lo).subset_of(summarise(ctx, bar, hi)));
}

TEST_CASE("node evaluations stay within the lattice bound")
{
    for (const auto& name : {"fig1", "mutual", "arrays", "hierarchy"}) {
        auto fx = load_fixture(name);
        AnalysisContext ctx(fx.program);
        SummaryEnv env(ctx.method_count());
        size_t reps = ctx.reps().size();
        for (size_t i = 0; i < ctx.method_count(); ++i) {
            AnalysisStats stats;
            summarise(ctx, static_cast<int>(i), env, &stats);
            CHECK(stats.summarise_calls == 1);
            CHECK(stats.node_evals
                  <= ctx.method_ctx(static_cast<int>(i)).cfg.size() * reps
                             * reps);
        }
    }
}

TEST_CASE("strict environments reject missing callee entries")
{
    auto fx = load_fixture("fig1");
    AnalysisContext ctx(fx.program);
    SummaryEnv env(ctx.method_count(), /*strict=*/true);
    REQUIRE_THROWS_AS(summarise(ctx, MethodId::parse("App.bar/1"), env),
                      CertificateError);
}
