// Command-line driver: analyze a program and emit a certificate, check a
// certificate, report leaks, generate synthetic corpora and benchmark the
// analyze/check cost gap.
//
// Exit codes: 0 success or valid certificate, 1 invalid certificate,
// 2 usage, I/O or analysis errors.

#include "dcert/dcert.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

double ms_since(std::chrono::steady_clock::time_point t0)
{
    auto dt = std::chrono::steady_clock::now() - t0;
    return std::chrono::duration<double, std::milli>(dt).count();
}

dcert::Program load_program(const std::string& ir_path,
                            const std::string& config_path)
{
    std::string ir = dcert::read_file(ir_path);
    std::string cfg = config_path.empty() ? std::string()
                                          : dcert::read_file(config_path);
    return dcert::parse_program(ir, cfg);
}

void emit_debug_graphs(const dcert::Program& prog, const std::string& cfg_path,
                       const std::string& cg_path)
{
    if (!cfg_path.empty()) {
        std::string out;
        for (const dcert::Method* m : prog.methods()) {
            dcert::Cfg g = dcert::build_cfg(*m);
            for (const auto& w : g.warnings)
                std::cerr << "warning: " << w << "\n";
            out += dcert::to_dot(g);
        }
        dcert::write_file(cfg_path, out);
    }
    if (!cg_path.empty())
        dcert::write_file(cg_path, dcert::to_dot(dcert::build_call_graph(prog)));
}

json leaks_json(const dcert::LeakReport& report)
{
    json arr = json::array();
    for (const auto& l : report.leaks)
        arr.push_back({{"method", l.method.str()},
                       {"sink", l.sink},
                       {"source", l.source}});
    return arr;
}

int cmd_analyze(const std::string& ir_path, const std::string& config_path,
                const std::string& out_path, bool entry_only, bool json_out,
                const std::string& emit_cfg, const std::string& emit_cg)
{
    dcert::Program prog = load_program(ir_path, config_path);
    emit_debug_graphs(prog, emit_cfg, emit_cg);

    dcert::AnalysisStats stats;
    dcert::AnalyzeOptions opt;
    opt.stats = &stats;
    auto t0 = std::chrono::steady_clock::now();
    dcert::Certificate cert = dcert::analyze(prog, opt);
    double elapsed = ms_since(t0);

    std::string cert_path = out_path.empty()
                                    ? std::filesystem::path(ir_path)
                                              .replace_extension(".dcert")
                                              .string()
                                    : out_path;
    dcert::write_file(cert_path, dcert::encode_certificate(cert));

    dcert::LeakReport report = dcert::leaks(cert, prog, entry_only);
    if (json_out) {
        json j{{"certificate", cert_path},
               {"digest", cert.digest},
               {"methods", cert.entries.size()},
               {"summarise_calls", stats.summarise_calls},
               {"time_ms", elapsed},
               {"entry_only", entry_only},
               {"leaks", leaks_json(report)}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "certificate: " << cert_path << " ("
                  << cert.entries.size() << " methods, digest " << cert.digest
                  << ")\n";
        if (report.leaks.empty()) {
            std::cout << "no source-to-sink flows found\n";
        } else {
            std::cout << report.leaks.size() << " source-to-sink flow(s):\n";
            for (const auto& l : report.leaks)
                std::cout << "  " << l.method.str() << ": " << l.source
                          << " -> " << l.sink << "\n";
        }
    }
    return 0;
}

int cmd_check(const std::string& ir_path, const std::string& config_path,
              const std::string& cert_path, bool parallel, bool json_out)
{
    dcert::Program prog = load_program(ir_path, config_path);
    dcert::Certificate cert =
            dcert::decode_certificate(dcert::read_file(cert_path));

    dcert::AnalysisStats stats;
    dcert::CheckOptions opt;
    opt.parallel = parallel;
    opt.stats = &stats;
    auto t0 = std::chrono::steady_clock::now();
    dcert::CheckResult result = dcert::check(prog, cert, opt);
    double elapsed = ms_since(t0);

    if (json_out) {
        json j{{"verdict", result.valid ? "valid" : "invalid"},
               {"summarise_calls", stats.summarise_calls},
               {"time_ms", elapsed}};
        if (result.failure) {
            j["method"] = result.failure->method.str();
            j["reason"] = dcert::to_string(result.failure->reason);
            j["missing"] = result.failure->missing;
            j["unexpected"] = result.failure->unexpected;
        }
        std::cout << j.dump(2) << "\n";
    } else if (result.valid) {
        std::cout << "valid\n";
    } else {
        std::cout << "invalid: " << dcert::to_string(result.failure->reason);
        if (!result.failure->method.str().empty())
            std::cout << " at " << result.failure->method.str();
        std::cout << "\n";
        for (const auto& [to, from] : result.failure->missing)
            std::cout << "  missing   (" << to << ", " << from << ")\n";
        for (const auto& [to, from] : result.failure->unexpected)
            std::cout << "  unexpected (" << to << ", " << from << ")\n";
    }
    return result.valid ? 0 : 1;
}

int cmd_leaks(const std::string& ir_path, const std::string& config_path,
              const std::string& cert_path, bool entry_only, bool json_out)
{
    dcert::Program prog = load_program(ir_path, config_path);
    dcert::Certificate cert =
            dcert::decode_certificate(dcert::read_file(cert_path));
    if (cert.digest != prog.digest)
        throw dcert::Error("certificate digest does not match the program");
    dcert::LeakReport report = dcert::leaks(cert, prog, entry_only);
    if (json_out) {
        json j{{"entry_only", entry_only}, {"leaks", leaks_json(report)}};
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& l : report.leaks)
            std::cout << l.method.str() << ": " << l.source << " -> " << l.sink
                      << "\n";
        if (report.leaks.empty()) std::cout << "no leaks\n";
    }
    return 0;
}

int cmd_gen(const dcert::GenSpec& spec, const std::string& out_path,
            std::string config_path, bool json_out)
{
    dcert::GeneratedProgram gp = dcert::generate(spec);
    if (config_path.empty())
        config_path = std::filesystem::path(out_path)
                              .replace_extension(".cfgtaint")
                              .string();
    dcert::write_file(out_path, gp.ir_text);
    dcert::write_file(config_path, gp.config_text);
    dcert::Program prog = dcert::parse_program(gp.ir_text, gp.config_text);
    if (json_out) {
        json j{{"ir", out_path},
               {"config", config_path},
               {"methods", prog.methods().size()}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "wrote " << out_path << " and " << config_path << " ("
                  << prog.methods().size() << " methods)\n";
    }
    return 0;
}

struct BenchRow {
    size_t methods = 0;
    double analyze_ms = 0;
    double check_ms = 0;
    size_t analyze_calls = 0;
    size_t check_calls = 0;
    size_t leaks = 0;
    double ratio = 0;
};

int cmd_bench(const std::vector<int>& sizes, int depth, int fan_out, int stmts,
              std::uint64_t seed, int reps, bool json_out)
{
    std::vector<BenchRow> rows;
    for (size_t si = 0; si < sizes.size(); ++si) {
        int size = sizes[si];
        dcert::GenSpec spec;
        spec.method_count = size;
        spec.call_chain_depth = depth > 0 ? depth : std::max(20, size / 50);
        spec.fan_out = fan_out > 0
                               ? fan_out
                               : 3 + (size >= 1000 ? 1 : 0)
                                         + (size >= 5000 ? 1 : 0);
        spec.stmts_per_method = stmts;
        spec.seed = seed + si;
        dcert::GeneratedProgram gp = dcert::generate(spec);
        dcert::Program prog = dcert::parse_program(gp.ir_text, gp.config_text);
        // parsing and graph construction are shared pre-processing; the
        // timers cover the fixpoint and the single checking pass only
        dcert::AnalysisContext ctx(prog);

        std::vector<double> a_ms, c_ms;
        BenchRow row;
        row.methods = prog.methods().size();
        for (int r = 0; r < reps; ++r) {
            dcert::AnalysisStats as;
            dcert::AnalyzeOptions aopt;
            aopt.stats = &as;
            auto t0 = std::chrono::steady_clock::now();
            dcert::Certificate cert = dcert::analyze(ctx, aopt);
            a_ms.push_back(ms_since(t0));

            dcert::AnalysisStats cs;
            dcert::CheckOptions copt;
            copt.stats = &cs;
            t0 = std::chrono::steady_clock::now();
            dcert::CheckResult res = dcert::check(ctx, cert, copt);
            c_ms.push_back(ms_since(t0));
            if (!res.valid) throw dcert::Error("bench certificate rejected");

            row.analyze_calls = as.summarise_calls;
            row.check_calls = cs.summarise_calls;
            row.leaks = dcert::leaks(cert, prog, false).leaks.size();
        }
        std::sort(a_ms.begin(), a_ms.end());
        std::sort(c_ms.begin(), c_ms.end());
        row.analyze_ms = a_ms[a_ms.size() / 2];
        row.check_ms = c_ms[c_ms.size() / 2];
        row.ratio = row.check_ms > 0 ? row.analyze_ms / row.check_ms : 0;
        rows.push_back(row);
    }

    if (json_out) {
        json arr = json::array();
        for (const auto& r : rows)
            arr.push_back({{"methods", r.methods},
                           {"analyze_ms", r.analyze_ms},
                           {"check_ms", r.check_ms},
                           {"analyze_summarise_calls", r.analyze_calls},
                           {"check_summarise_calls", r.check_calls},
                           {"leaks", r.leaks},
                           {"ratio", r.ratio}});
        std::cout << arr.dump(2) << "\n";
    } else {
        std::cout << "methods\tanalyze_ms\tcheck_ms\tanalyze_calls\t"
                     "check_calls\tleaks\tratio\n";
        for (const auto& r : rows)
            std::cout << r.methods << '\t' << r.analyze_ms << '\t'
                      << r.check_ms << '\t' << r.analyze_calls << '\t'
                      << r.check_calls << '\t' << r.leaks << '\t' << r.ratio
                      << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"summary-based taint analysis with checkable certificates"};
    app.require_subcommand(1);

    std::string ir_path, config_path, cert_path, out_path;
    std::string emit_cfg, emit_cg;
    bool entry_only = false, json_out = false, parallel = false;

    auto* analyze = app.add_subcommand("analyze",
                                       "analyze a program and emit a "
                                       "certificate plus a leak summary");
    analyze->add_option("program", ir_path, "IR source file")->required();
    analyze->add_option("-c,--config", config_path, "taint config file");
    analyze->add_option("-o,--output", out_path, "certificate output path");
    analyze->add_flag("--entry-only", entry_only,
                      "report leaks for entry points only");
    analyze->add_option("--emit-cfg", emit_cfg,
                        "write per-method control-flow graphs as DOT");
    analyze->add_option("--emit-cg", emit_cg, "write the call graph as DOT");
    analyze->add_flag("--json-output", json_out, "machine-readable output");

    auto* check = app.add_subcommand("check",
                                     "validate a certificate against a "
                                     "program");
    check->add_option("program", ir_path, "IR source file")->required();
    check->add_option("-c,--config", config_path, "taint config file");
    check->add_option("--cert", cert_path, "certificate file")->required();
    check->add_flag("--parallel", parallel, "check methods in parallel");
    check->add_flag("--json-output", json_out, "machine-readable output");

    auto* leaks = app.add_subcommand("leaks",
                                     "print source-to-sink flows recorded in "
                                     "a certificate");
    leaks->add_option("program", ir_path, "IR source file")->required();
    leaks->add_option("-c,--config", config_path, "taint config file");
    leaks->add_option("--cert", cert_path, "certificate file")->required();
    leaks->add_flag("--entry-only", entry_only,
                    "restrict to entry-point methods");
    leaks->add_flag("--json-output", json_out, "machine-readable output");

    dcert::GenSpec spec;
    auto* gen = app.add_subcommand("gen", "emit a synthetic program");
    gen->add_option("-o,--output", out_path, "IR output path")->required();
    gen->add_option("--config-out", config_path, "config output path");
    gen->add_option("--methods", spec.method_count, "method count");
    gen->add_option("--depth", spec.call_chain_depth, "call chain depth");
    gen->add_option("--fan-out", spec.fan_out, "callees per method");
    gen->add_option("--stmts", spec.stmts_per_method,
                    "statements per method");
    gen->add_option("--branch-density", spec.branch_density,
                    "probability of a tainted branch per method");
    gen->add_option("--array-density", spec.array_field_density,
                    "probability of a field/array hop per method");
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_flag("--json-output", json_out, "machine-readable output");

    std::vector<int> sizes{200, 1000, 5000};
    int bdepth = 0, bfan = 0, bstmts = 8, reps = 3;
    std::uint64_t bseed = 42;
    auto* bench = app.add_subcommand("bench",
                                     "generate corpora and compare analyze "
                                     "vs check cost");
    bench->add_option("--sizes", sizes, "method counts to benchmark");
    bench->add_option("--depth", bdepth, "chain depth (0 = scale with size)");
    bench->add_option("--fan-out", bfan, "fan-out (0 = scale with size)");
    bench->add_option("--stmts", bstmts, "statements per method");
    bench->add_option("--reps", reps, "repetitions per size (median)");
    bench->add_option("--seed", bseed, "generator seed");
    bench->add_flag("--json-output", json_out, "machine-readable output");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(analyze))
            return cmd_analyze(ir_path, config_path, out_path, entry_only,
                               json_out, emit_cfg, emit_cg);
        if (app.got_subcommand(check))
            return cmd_check(ir_path, config_path, cert_path, parallel,
                             json_out);
        if (app.got_subcommand(leaks))
            return cmd_leaks(ir_path, config_path, cert_path, entry_only,
                             json_out);
        if (app.got_subcommand(gen))
            return cmd_gen(spec, out_path, config_path, json_out);
        if (app.got_subcommand(bench))
            return cmd_bench(sizes, bdepth, bfan, bstmts, bseed, reps,
                             json_out);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const dcert::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
