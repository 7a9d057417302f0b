#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace dcert;
using testutil::load_fixture;

namespace {

const Method& method(const Program& p, const char* id)
{
    const Method* m = p.find_method(MethodId::parse(id));
    REQUIRE(m != nullptr);
    return *m;
}

} // namespace

TEST_CASE("representative encodings are injective and decode back")
{
    std::vector<Representative> reps = {
            Representative::var(MethodId("App", "foo", 1), "x"),
            Representative::var(MethodId("App", "foo", 1), "y"),
            Representative::var(MethodId("App", "bar", 1), "x"),
            Representative::param(0),
            Representative::param(1),
            Representative::param(12),
            Representative::ret(),
            Representative::field("A", "f"),
            Representative::field("B", "f"),
            Representative::field("A", "g"),
            Representative::array("v:App.foo/1::a"),
            Representative::array("v:App.bar/1::a"),
            Representative::sym("id"),
            Representative::sym("sms"),
    };
    std::set<std::string> encodings;
    for (const auto& r : reps) {
        std::string e = r.encode();
        CHECK(encodings.insert(e).second);
        auto back = Representative::decode(e);
        REQUIRE(back.has_value());
        CHECK(*back == r);
    }
    CHECK(encodings.size() == reps.size());
}

TEST_CASE("malformed encodings are rejected")
{
    for (const char* bad : {"", "x", "v:foo", "p:", "p:01", "p:x", "f:noDot",
                            "q:zzz", "retx"})
        CHECK_FALSE(Representative::decode(bad).has_value());
}

TEST_CASE("simple locals and formals map to scoped representatives")
{
    auto fx = load_fixture("fig1");
    const Method& foo = method(fx.program, "App.foo/1");
    ArrayPartition ap = build_array_partition(fx.program);

    CHECK(representative(LValue::var("x"), foo, fx.program, ap).encode()
          == "v:App.foo/1::x");
    CHECK(representative(LValue::var("this"), foo, fx.program, ap).encode()
          == "p:0");

    const Method& send = method(fx.program, "App.Send/2");
    CHECK(representative(LValue::var("x"), send, fx.program, ap).encode()
          == "p:1");
}

TEST_CASE("field accesses hoist to the highest declaring class")
{
    std::string text = "class A { field f: Int }\n"
                       "class B extends A { field f: Int field g: Int }\n"
                       "class C extends B {\n"
                       "  method m/3(this: C, o: B, q: C) -> Int {\n"
                       "    x := o.f\n"
                       "    y := q.f\n"
                       "    z := q.g\n"
                       "    return x\n"
                       "  }\n"
                       "}\n";
    Program p = parse_program(text, "");
    CHECK(hoist_field(p, "C", "f") == "A"); // topmost declarer wins
    CHECK(hoist_field(p, "B", "f") == "A");
    CHECK(hoist_field(p, "C", "g") == "B");
    REQUIRE_THROWS_AS(hoist_field(p, "A", "g"), AnalysisError);

    // both access sites collapse onto one representative
    const Method& m = method(p, "C.m/3");
    ArrayPartition ap = build_array_partition(p);
    auto r1 = representative(LValue::field_access("o", "f"), m, p, ap);
    auto r2 = representative(LValue::field_access("q", "f"), m, p, ap);
    CHECK(r1.encode() == "f:A.f");
    CHECK(r1 == r2);
}

TEST_CASE("array accesses share one representative per alias set")
{
    std::string text = "class T {\n"
                       "  method m/2(this: T, a: Arr) -> Int {\n"
                       "    b := a\n"
                       "    i := const 0\n"
                       "    j := const 1\n"
                       "    x := a[i]\n"
                       "    y := b[j]\n"
                       "    z := a[j]\n"
                       "    return x\n"
                       "  }\n"
                       "}\n";
    Program p = parse_program(text, "");
    const Method& m = method(p, "T.m/2");
    ArrayPartition ap = build_array_partition(p);

    auto ra = representative(LValue::array_access("a"), m, p, ap);
    auto rb = representative(LValue::array_access("b"), m, p, ap);
    CHECK(ra == rb); // copies land in the same alias set
    CHECK(ra.encode() == "arr:v:T.m/2::a");
}

TEST_CASE("array partitions close over call and return bindings")
{
    auto fx = load_fixture("arrays");
    ArrayPartition ap = build_array_partition(fx.program);
    auto id_put =
            ap.partition_id(ArrayPartition::var_member(
                    MethodId::parse("Box.put/3"), "a"));
    auto id_take =
            ap.partition_id(ArrayPartition::var_member(
                    MethodId::parse("Box.take/2"), "b"));
    auto id_rt =
            ap.partition_id(ArrayPartition::var_member(
                    MethodId::parse("Box.roundtrip/1"), "arr"));
    REQUIRE(id_put.has_value());
    REQUIRE(id_take.has_value());
    REQUIRE(id_rt.has_value());
    CHECK(*id_put == *id_take);
    CHECK(*id_put == *id_rt);
    CHECK(*id_put == "v:Box.put/3::a"); // lexicographically smallest member
}

TEST_CASE("programs without arrays build an empty partition")
{
    auto fx = load_fixture("fig1");
    ArrayPartition ap = build_array_partition(fx.program);
    CHECK(ap.set_count() == 0);
}

TEST_CASE("partition construction is deterministic")
{
    auto fx = load_fixture("arrays");
    Program p2 = parse_program(fx.ir_text, fx.config_text);
    ArrayPartition a = build_array_partition(fx.program);
    ArrayPartition b = build_array_partition(p2);
    auto member = ArrayPartition::var_member(MethodId::parse("Box.take/2"),
                                             "b");
    CHECK(a.partition_id(member) == b.partition_id(member));
    CHECK(a.set_count() == b.set_count());
}

TEST_CASE("unknown fields in a hierarchy are an analysis error")
{
    std::string text = "class A {\n"
                       "  method m/2(this: A, o: A) -> Int {\n"
                       "    x := o.nope\n"
                       "    return x\n"
                       "  }\n"
                       "}\n";
    Program p = parse_program(text, "");
    const Method& m = method(p, "A.m/2");
    ArrayPartition ap;
    ap.seal();
    REQUIRE_THROWS_WITH(
            representative(LValue::field_access("o", "nope"), m, p, ap),
            Catch::Matchers::ContainsSubstring("not declared"));
}
