#include "support/helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace dcert;
using testutil::entry_pairs;
using testutil::load_fixture;
using testutil::load_golden;
using testutil::Pairs;

TEST_CASE("analyzing the flagship fixture reproduces the final summary map")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);

    REQUIRE(cert.entries.size() == 5);
    CHECK(entry_pairs(cert, "App.foo/1")
          == Pairs{{"ret", "sym:num"}, {"sym:sms", "sym:id"}});
    CHECK(entry_pairs(cert, "App.bar/1")
          == Pairs{{"ret", "sym:num"}, {"sym:sms", "sym:id"}});
    CHECK(entry_pairs(cert, "App.getId/1") == Pairs{{"ret", "sym:id"}});
    CHECK(entry_pairs(cert, "App.getNumber/1") == Pairs{{"ret", "sym:num"}});
    CHECK(entry_pairs(cert, "App.Send/2") == Pairs{{"sym:sms", "p:1"}});
    CHECK(cert.digest == fx.program.digest);
}

TEST_CASE("golden certificates stay byte-stable")
{
    for (const auto& name : testutil::fixture_names()) {
        auto fx = load_fixture(name);
        std::string want = read_file(testutil::fixture_dir() + "/" + name
                                     + ".dcert");
        CHECK(encode_certificate(analyze(fx.program)) == want);
    }
}

TEST_CASE("a program with one empty method gets one empty entry")
{
    Program p = parse_program("class T { method e/1(this: T) -> void {} }",
                              "");
    Certificate cert = analyze(p);
    REQUIRE(cert.entries.size() == 1);
    CHECK(cert.entries.at("T.e/1").empty());
}

TEST_CASE("mutual recursion reaches the hand-computed fixpoint")
{
    auto fx = load_fixture("mutual");
    AnalysisStats stats;
    AnalyzeOptions opt;
    opt.stats = &stats;
    Certificate cert = analyze(fx.program, opt);

    // param 1 is copied to the return value around the cycle
    CHECK(entry_pairs(cert, "R.f/2") == Pairs{{"ret", "p:1"}});
    CHECK(entry_pairs(cert, "R.g/2") == Pairs{{"ret", "p:1"}});
    CHECK(stats.summarise_calls <= 3 * fx.program.methods().size());
    CHECK(check(fx.program, cert).valid);
}

TEST_CASE("every fixture round-trips through its own certificate")
{
    for (const auto& name : testutil::fixture_names()) {
        auto fx = load_fixture(name);
        AnalysisStats astats, cstats;
        AnalyzeOptions aopt;
        aopt.stats = &astats;
        Certificate cert = analyze(fx.program, aopt);
        CheckOptions copt;
        copt.stats = &cstats;
        CheckResult res = check(fx.program, cert, copt);
        CAPTURE(name);
        CHECK(res.valid);
        CHECK(cstats.summarise_calls == fx.program.methods().size());
        CHECK(astats.summarise_calls >= cstats.summarise_calls);
    }
}

TEST_CASE("the analyzer outpaces the checker once call chains appear")
{
    auto fx = load_fixture("fig1");
    AnalysisStats astats, cstats;
    AnalyzeOptions aopt;
    aopt.stats = &astats;
    Certificate cert = analyze(fx.program, aopt);
    CheckOptions copt;
    copt.stats = &cstats;
    REQUIRE(check(fx.program, cert, copt).valid);
    CHECK(cstats.summarise_calls == 5);
    CHECK(astats.summarise_calls > 5);
}

TEST_CASE("missing entries are rejected with the method named")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);
    cert.entries.erase("App.foo/1");
    CheckResult res = check(fx.program, cert);
    REQUIRE_FALSE(res.valid);
    CHECK(res.failure->reason == CheckFailure::MissingEntry);
    CHECK(res.failure->method.str() == "App.foo/1");
}

TEST_CASE("removing a pair is caught at the owning method with a diff")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);
    auto& bar = cert.entries.at("App.bar/1");
    bar.erase(std::remove(bar.begin(), bar.end(),
                          std::make_pair(std::string("sym:sms"),
                                         std::string("sym:id"))),
              bar.end());

    CheckResult res = check(fx.program, cert);
    REQUIRE_FALSE(res.valid);
    CHECK(res.failure->reason == CheckFailure::SummaryMismatch);
    CHECK(res.failure->method.str() == "App.bar/1");
    REQUIRE(res.failure->missing.size() == 1);
    CHECK(res.failure->missing[0]
          == std::make_pair(std::string("sym:sms"), std::string("sym:id")));
}

TEST_CASE("a caller's entry must equal the substitution of its callee's")
{
    // with bar's entry fixed, foo's entry is forced to the same pairs
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);
    CHECK(entry_pairs(cert, "App.foo/1") == entry_pairs(cert, "App.bar/1"));

    auto& foo = cert.entries.at("App.foo/1");
    foo.erase(foo.begin()); // drop one pair from foo only
    CheckResult res = check(fx.program, cert);
    REQUIRE_FALSE(res.valid);
    CHECK(res.failure->method.str() == "App.foo/1");
}

TEST_CASE("digest mismatches are reported before any summarisation")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);
    cert.digest = "0000000000000000";
    AnalysisStats stats;
    CheckOptions opt;
    opt.stats = &stats;
    CheckResult res = check(fx.program, cert, opt);
    REQUIRE_FALSE(res.valid);
    CHECK(res.failure->reason == CheckFailure::DigestMismatch);
    CHECK(stats.summarise_calls == 0);
}

TEST_CASE("entries for unknown methods invalidate the certificate")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);
    cert.entries["App.ghost/1"] = {{"ret", "sym:id"}};
    CheckResult res = check(fx.program, cert);
    REQUIRE_FALSE(res.valid);
    CHECK(res.failure->method.str() == "App.ghost/1");
}

TEST_CASE("parallel checking agrees with sequential checking")
{
    auto fx = load_fixture("fig1");
    Certificate good = analyze(fx.program);
    CheckOptions par;
    par.parallel = true;
    AnalysisStats stats;
    par.stats = &stats;
    CHECK(check(fx.program, good, par).valid);
    CHECK(stats.summarise_calls == fx.program.methods().size());

    Certificate bad = good;
    bad.entries.at("App.bar/1").clear();
    bad.entries.at("App.foo/1").clear();
    CheckResult seq = check(fx.program, bad);
    CheckResult parres = check(fx.program, bad, par);
    REQUIRE_FALSE(parres.valid);
    CHECK(parres.failure->method == seq.failure->method); // lowest id wins
}

TEST_CASE("re-running the analyzer on its own output changes nothing")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);

    AnalysisStats stats;
    AnalyzeOptions opt;
    opt.seed = &cert;
    opt.stats = &stats;
    Certificate again = analyze(fx.program, opt);
    CHECK(again == cert);
    CHECK(stats.summarise_calls == fx.program.methods().size());
}

TEST_CASE("the fixpoint is independent of the work-list order")
{
    auto fx = load_fixture("fig1");
    Certificate reference = analyze(fx.program);

    std::vector<MethodId> order;
    for (const Method* m : fx.program.methods()) order.push_back(m->id);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        std::shuffle(order.begin(), order.end(), rng);
        AnalyzeOptions opt;
        opt.initial_order = &order;
        CHECK(analyze(fx.program, opt) == reference);
    }
}

TEST_CASE("library entries are identical across host programs")
{
    auto a = load_fixture("ctx_host_a");
    auto b = load_fixture("ctx_host_b");
    Certificate ca = analyze(a.program);
    Certificate cb = analyze(b.program);
    for (const char* id : {"Lib.dist/2", "Lib.fetch/1"}) {
        CAPTURE(id);
        CHECK(ca.entries.at(id) == cb.entries.at(id));
    }
}

TEST_CASE("leak reports list sink/source symbol pairs per method")
{
    auto fx = load_fixture("fig1");
    Certificate cert = analyze(fx.program);

    LeakReport all = leaks(cert, fx.program, false);
    REQUIRE(all.leaks.size() == 2);
    CHECK(all.leaks[0].method.str() == "App.bar/1");
    CHECK(all.leaks[1].method.str() == "App.foo/1");
    CHECK(all.leaks[0].sink == "sms");
    CHECK(all.leaks[0].source == "id");

    LeakReport entry = leaks(cert, fx.program, true);
    REQUIRE(entry.leaks.size() == 1);
    CHECK(entry.leaks[0].method.str() == "App.foo/1");
    CHECK(entry.entry_only);
}

TEST_CASE("certificates without symbol pairs yield empty reports")
{
    auto fx = load_fixture("mutual");
    Certificate cert = analyze(fx.program);
    CHECK(leaks(cert, fx.program, false).leaks.empty());
}

TEST_CASE("helper methods report their own flows when not restricted")
{
    auto fx = load_fixture("arrays");
    Certificate cert = analyze(fx.program);
    LeakReport all = leaks(cert, fx.program, false);
    bool found = false;
    for (const auto& l : all.leaks)
        if (l.method.str() == "Box.roundtrip/1" && l.sink == "out"
            && l.source == "sec")
            found = true;
    CHECK(found);
}

TEST_CASE("certificate encoding round-trips and stays canonical")
{
    for (const auto& name : testutil::fixture_names()) {
        auto fx = load_fixture(name);
        Certificate cert = analyze(fx.program);
        std::string bytes = encode_certificate(cert);
        Certificate back = decode_certificate(bytes);
        CHECK(back == cert);
        CHECK(encode_certificate(back) == bytes);

        // a fresh analysis of a fresh parse emits identical bytes
        Program again = parse_program(fx.ir_text, fx.config_text);
        CHECK(encode_certificate(analyze(again)) == bytes);
    }
}

TEST_CASE("malformed certificates raise decode errors")
{
    auto fx = load_fixture("fig1");
    std::string bytes = encode_certificate(analyze(fx.program));

    SECTION("truncated file")
    {
        REQUIRE_THROWS_AS(
                decode_certificate(bytes.substr(0, bytes.size() / 2)),
                CertificateError);
    }
    SECTION("version mismatch")
    {
        std::string other = bytes;
        auto pos = other.find("\"version\": \"1\"");
        REQUIRE(pos != std::string::npos);
        other.replace(pos, 14, "\"version\": \"9\"");
        REQUIRE_THROWS_WITH(
                decode_certificate(other),
                Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("unknown representative tag")
    {
        std::string other = bytes;
        auto pos = other.find("\"sym:sms\"");
        REQUIRE(pos != std::string::npos);
        other.replace(pos, 9, "\"zzz:sms\"");
        REQUIRE_THROWS_WITH(
                decode_certificate(other),
                Catch::Matchers::ContainsSubstring("representative"));
    }
    SECTION("not json at all")
    {
        REQUIRE_THROWS_AS(decode_certificate("certificate"),
                          CertificateError);
    }
}

TEST_CASE("every single tampering of the flagship certificate is rejected")
{
    auto fx = load_fixture("fig1");
    Certificate pristine = analyze(fx.program);
    REQUIRE(check(fx.program, pristine).valid);

    size_t rejected = 0, tried = 0;

    // entry removals
    for (const auto& [id, entry] : pristine.entries) {
        Certificate c = pristine;
        c.entries.erase(id);
        ++tried;
        if (!check(fx.program, c).valid) ++rejected;
    }
    // pair deletions
    for (const auto& [id, entry] : pristine.entries) {
        for (size_t k = 0; k < entry.size(); ++k) {
            Certificate c = pristine;
            auto& e = c.entries.at(id);
            e.erase(e.begin() + static_cast<long>(k));
            ++tried;
            if (!check(fx.program, c).valid) ++rejected;
        }
    }
    // pair insertions over the representative universe of the certificate
    std::set<std::string> universe{"ret", "p:0", "p:1", "p:2",
                                   "sym:id", "sym:num", "sym:sms"};
    for (const auto& [id, entry] : pristine.entries)
        for (const auto& pr : entry) {
            universe.insert(pr.first);
            universe.insert(pr.second);
        }
    for (const auto& [id, entry] : pristine.entries) {
        Pairs present(entry.begin(), entry.end());
        for (const auto& to : universe)
            for (const auto& from : universe) {
                if (present.count({to, from})) continue;
                Certificate c = pristine;
                auto& e = c.entries.at(id);
                e.emplace_back(to, from);
                std::sort(e.begin(), e.end());
                ++tried;
                if (!check(fx.program, c).valid) ++rejected;
            }
    }
    CHECK(tried > 200);
    CHECK(rejected == tried);
}
