#ifndef DCERT_CERTIFY_HPP
#define DCERT_CERTIFY_HPP

// Analyzer and checker.
//
// The analyzer runs a work-list over all methods, summarising each against
// the current environment and re-queueing callers whenever a summary grows;
// the resulting method -> facts map is the certificate. The checker replays
// one summarise per method against the certificate itself as the callee
// environment and demands set equality, so validation needs no fixpoint.

#include "dcert/dataflow.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dcert {

inline constexpr const char* kCertificateVersion = "1";

using CertEntry = std::vector<std::pair<std::string, std::string>>;

struct Certificate {
    std::string version = kCertificateVersion;
    std::string digest;
    std::map<std::string, CertEntry> entries; // MethodId string -> sorted pairs

    friend bool operator==(const Certificate&, const Certificate&) = default;
};

// ---------------------------------------------------------------------------
// Analyzer
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    const Certificate* seed = nullptr;            // warm-start environment
    const std::vector<MethodId>* initial_order = nullptr; // override work-list
    AnalysisStats* stats = nullptr;
};

namespace detail {

inline CertEntry entry_from_facts(const AnalysisContext& ctx, const FactSet& fs)
{
    CertEntry e;
    for (Fact f : fs) e.push_back(ctx.fact_strings(f));
    std::sort(e.begin(), e.end());
    return e;
}

inline FactSet facts_from_entry(AnalysisContext& ctx, const CertEntry& e)
{
    FactSet fs;
    for (const auto& [to, from] : e)
        fs.insert(Fact{ctx.reps().intern_string(to),
                       ctx.reps().intern_string(from)});
    return fs;
}

// Callees-first processing order; cycles broken by visiting methods in
// MethodId order. Any initial order converges to the same fixpoint, this
// one just keeps re-queues low.
inline std::vector<int> bottom_up_order(const AnalysisContext& ctx)
{
    const size_t n = ctx.method_count();
    std::vector<std::vector<int>> callees(n);
    for (const auto& [a, b] : ctx.call_graph().edges()) {
        int ia = ctx.index_of(a);
        int ib = ctx.index_of(b);
        if (ia >= 0 && ib >= 0) callees[ia].push_back(ib);
    }
    for (auto& v : callees) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    std::vector<int> order;
    std::vector<char> state(n, 0); // 0 new, 1 visiting, 2 done
    for (size_t root = 0; root < n; ++root) {
        if (state[root]) continue;
        std::vector<std::pair<int, size_t>> stack{{static_cast<int>(root), 0}};
        state[root] = 1;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < callees[v].size()) {
                int w = callees[v][next++];
                if (!state[w]) {
                    state[w] = 1;
                    stack.emplace_back(w, 0);
                }
            } else {
                state[v] = 2;
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    return order;
}

} // namespace detail

// Context-reusing variant: graph and representative construction is shared
// pre-processing, callers that time analysis proper build the context once.
inline Certificate analyze(AnalysisContext& ctx, const AnalyzeOptions& opt = {})
{
    const size_t n = ctx.method_count();
    SummaryEnv env(n, /*strict=*/false);

    if (opt.seed) {
        for (const auto& [id, entry] : opt.seed->entries) {
            int i;
            try {
                i = ctx.index_of(MethodId::parse(id));
            } catch (const Error&) {
                continue;
            }
            if (i >= 0) env.set(i, detail::facts_from_entry(ctx, entry));
        }
    }

    std::deque<int> worklist;
    if (opt.initial_order) {
        for (const auto& id : *opt.initial_order) {
            int i = ctx.index_of(id);
            if (i < 0) throw AnalysisError("unknown method in work-list order: "
                                           + id.str());
            worklist.push_back(i);
        }
        if (worklist.size() != n)
            throw AnalysisError("work-list order must cover every method");
    } else {
        for (int i : detail::bottom_up_order(ctx)) worklist.push_back(i);
    }

    AnalysisStats local;
    AnalysisStats* stats = opt.stats ? opt.stats : &local;
    while (!worklist.empty()) {
        int m = worklist.front();
        worklist.pop_front();
        FactSet fresh = filter_summary(ctx, summarise(ctx, m, env, stats));
        if (!(fresh == env.get(m))) {
            env.set(m, std::move(fresh));
            for (int caller : ctx.callers_of(m)) worklist.push_back(caller);
        }
    }

    Certificate cert;
    cert.digest = ctx.program().digest;
    for (size_t i = 0; i < n; ++i)
        cert.entries[ctx.id_of(static_cast<int>(i)).str()] =
                detail::entry_from_facts(ctx, env.get(static_cast<int>(i)));
    return cert;
}

inline Certificate analyze(const Program& p, const AnalyzeOptions& opt = {})
{
    AnalysisContext ctx(p);
    return analyze(ctx, opt);
}

// ---------------------------------------------------------------------------
// Checker
// ---------------------------------------------------------------------------

enum class CheckFailure { MissingEntry, SummaryMismatch, DigestMismatch };

inline const char* to_string(CheckFailure f)
{
    switch (f) {
    case CheckFailure::MissingEntry: return "missing-entry";
    case CheckFailure::SummaryMismatch: return "summary-mismatch";
    case CheckFailure::DigestMismatch: return "digest-mismatch";
    }
    return "?";
}

struct CheckResult {
    struct Failure {
        MethodId method; // empty for digest failures
        CheckFailure reason = CheckFailure::SummaryMismatch;
        CertEntry missing;    // recomputed facts absent from the certificate
        CertEntry unexpected; // certificate facts the recomputation lacks
    };

    bool valid = false;
    std::optional<Failure> failure;

    static CheckResult ok() { return CheckResult{true, std::nullopt}; }
    static CheckResult fail(Failure f)
    {
        return CheckResult{false, std::move(f)};
    }
};

struct CheckOptions {
    bool parallel = false;
    AnalysisStats* stats = nullptr;
};

inline CheckResult check(AnalysisContext& ctx, const Certificate& c,
                         const CheckOptions& opt = {})
{
    AnalysisStats local;
    AnalysisStats* stats = opt.stats ? opt.stats : &local;

    if (c.digest != ctx.program().digest)
        return CheckResult::fail({MethodId(), CheckFailure::DigestMismatch,
                                  {{"digest", c.digest}},
                                  {{"digest", ctx.program().digest}}});

    const size_t n = ctx.method_count();

    // every certificate entry must name a method of the program
    for (const auto& [id, entry] : c.entries) {
        bool known = false;
        try {
            known = ctx.index_of(MethodId::parse(id)) >= 0;
        } catch (const Error&) {
            known = false;
        }
        if (!known) {
            CheckResult::Failure f;
            try {
                f.method = MethodId::parse(id);
            } catch (const Error&) {
                f.method = MethodId("", id, 0);
            }
            f.reason = CheckFailure::SummaryMismatch;
            f.unexpected = entry;
            return CheckResult::fail(std::move(f));
        }
    }

    // all methods of the program must have entries
    std::vector<const CertEntry*> expected(n, nullptr);
    for (size_t i = 0; i < n; ++i) {
        auto it = c.entries.find(ctx.id_of(static_cast<int>(i)).str());
        if (it == c.entries.end())
            return CheckResult::fail({ctx.id_of(static_cast<int>(i)),
                                      CheckFailure::MissingEntry,
                                      {},
                                      {}});
        expected[i] = &it->second;
    }

    SummaryEnv env(n, /*strict=*/true);
    for (size_t i = 0; i < n; ++i)
        env.set(static_cast<int>(i),
                detail::facts_from_entry(ctx, *expected[i]));

    auto check_one = [&](int i, AnalysisStats* st)
            -> std::optional<CheckResult::Failure> {
        FactSet recomputed =
                filter_summary(ctx, summarise(ctx, i, env, st));
        CertEntry got = detail::entry_from_facts(ctx, recomputed);
        CertEntry want = *expected[i];
        std::sort(want.begin(), want.end());
        if (got == want) return std::nullopt;
        CheckResult::Failure f;
        f.method = ctx.id_of(i);
        f.reason = CheckFailure::SummaryMismatch;
        std::set_difference(got.begin(), got.end(), want.begin(), want.end(),
                            std::back_inserter(f.missing));
        std::set_difference(want.begin(), want.end(), got.begin(), got.end(),
                            std::back_inserter(f.unexpected));
        return f;
    };

    if (!opt.parallel) {
        for (size_t i = 0; i < n; ++i)
            if (auto f = check_one(static_cast<int>(i), stats))
                return CheckResult::fail(std::move(*f));
        return CheckResult::ok();
    }

    // method checks are independent; run striped and report the failure
    // with the lowest MethodId
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    unsigned workers = std::min<unsigned>(hw, 8);
    std::vector<std::future<std::pair<std::optional<CheckResult::Failure>,
                                      AnalysisStats>>> futs;
    for (unsigned w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&, w]() {
            AnalysisStats st;
            std::optional<CheckResult::Failure> first;
            for (size_t i = w; i < n; i += workers) {
                auto f = check_one(static_cast<int>(i), &st);
                if (f && !first) first = std::move(f);
            }
            return std::make_pair(std::move(first), st);
        }));
    }
    std::optional<CheckResult::Failure> best;
    for (auto& fu : futs) {
        auto [f, st] = fu.get();
        stats->absorb(st);
        if (f && (!best || f->method < best->method)) best = std::move(f);
    }
    if (best) return CheckResult::fail(std::move(*best));
    return CheckResult::ok();
}

inline CheckResult check(const Program& p, const Certificate& c,
                         const CheckOptions& opt = {})
{
    AnalysisContext ctx(p);
    return check(ctx, c, opt);
}

// ---------------------------------------------------------------------------
// Leak report: (sink symbol, source symbol) pairs found in summaries.
// ---------------------------------------------------------------------------

struct Leak {
    MethodId method;
    std::string sink;
    std::string source;
    friend auto operator<=>(const Leak&, const Leak&) = default;
};

struct LeakReport {
    std::vector<Leak> leaks;
    bool entry_only = false;
};

inline LeakReport leaks(const Certificate& c, const Program& p, bool entry_only)
{
    std::set<std::string> sink_syms, source_syms;
    for (const auto& [m, s] : p.config.sinks) sink_syms.insert("sym:" + s);
    for (const auto& [m, s] : p.config.sources) source_syms.insert("sym:" + s);

    LeakReport report;
    report.entry_only = entry_only;
    for (const auto& [id, entry] : c.entries) {
        MethodId mid;
        try {
            mid = MethodId::parse(id);
        } catch (const Error&) {
            continue;
        }
        if (entry_only) {
            const Method* m = p.find_method(mid);
            if (!m || !m->entry_point) continue;
        }
        for (const auto& [to, from] : entry) {
            if (sink_syms.count(to) && source_syms.count(from))
                report.leaks.push_back(
                        Leak{mid, to.substr(4), from.substr(4)});
        }
    }
    std::sort(report.leaks.begin(), report.leaks.end());
    report.leaks.erase(std::unique(report.leaks.begin(), report.leaks.end(),
                                   [](const Leak& a, const Leak& b) {
                                       return a.method == b.method
                                              && a.sink == b.sink
                                              && a.source == b.source;
                                   }),
                       report.leaks.end());
    return report;
}

// ---------------------------------------------------------------------------
// Certificate serialization: canonical JSON, entries sorted by method id,
// pairs sorted lexicographically, byte-identical across runs.
// ---------------------------------------------------------------------------

inline std::string encode_certificate(const Certificate& c)
{
    nlohmann::json j;
    j["version"] = c.version;
    j["digest"] = c.digest;
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [id, entry] : c.entries) {
        nlohmann::json pairs = nlohmann::json::array();
        CertEntry sorted = entry;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [to, from] : sorted)
            pairs.push_back(nlohmann::json::array({to, from}));
        entries[id] = std::move(pairs);
    }
    j["entries"] = std::move(entries);
    return j.dump(2) + "\n";
}

inline Certificate decode_certificate(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CertificateError(std::string("malformed certificate: ")
                               + e.what());
    }
    if (!j.is_object() || !j.contains("version") || !j.contains("digest")
        || !j.contains("entries"))
        throw CertificateError("certificate is missing required fields");
    Certificate c;
    if (!j["version"].is_string()
        || (c.version = j["version"].get<std::string>())
                   != kCertificateVersion)
        throw CertificateError("unsupported certificate version");
    if (!j["digest"].is_string())
        throw CertificateError("certificate digest must be a string");
    c.digest = j["digest"].get<std::string>();
    if (!j["entries"].is_object())
        throw CertificateError("certificate entries must be an object");
    for (const auto& [id, pairs] : j["entries"].items()) {
        try {
            MethodId::parse(id);
        } catch (const Error& e) {
            throw CertificateError(e.what());
        }
        if (!pairs.is_array())
            throw CertificateError("entry for " + id + " must be an array");
        CertEntry entry;
        for (const auto& pr : pairs) {
            if (!pr.is_array() || pr.size() != 2 || !pr[0].is_string()
                || !pr[1].is_string())
                throw CertificateError("entry pairs must be [to, from] "
                                       "string pairs");
            std::string to = pr[0].get<std::string>();
            std::string from = pr[1].get<std::string>();
            for (const auto& s : {to, from}) {
                auto r = Representative::decode(s);
                if (!r || r->encode() != s)
                    throw CertificateError(
                            "unknown representative encoding: " + s);
            }
            entry.emplace_back(std::move(to), std::move(from));
        }
        std::sort(entry.begin(), entry.end());
        entry.erase(std::unique(entry.begin(), entry.end()), entry.end());
        c.entries[id] = std::move(entry);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Small file helpers shared by the CLI and the test suites.
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

}

#endif
