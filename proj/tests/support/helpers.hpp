#ifndef DCERT_TESTS_HELPERS_HPP
#define DCERT_TESTS_HELPERS_HPP

#include "dcert/dcert.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

inline std::string fixture_dir()
{
#ifdef DCERT_FIXTURE_DIR
    return DCERT_FIXTURE_DIR;
#else
    return "fixtures";
#endif
}

struct Fixture {
    std::string ir_text;
    std::string config_text;
    dcert::Program program;
};

inline Fixture load_fixture(const std::string& name)
{
    Fixture f;
    f.ir_text = dcert::read_file(fixture_dir() + "/" + name + ".ir");
    f.config_text = dcert::read_file(fixture_dir() + "/" + name + ".cfgtaint");
    f.program = dcert::parse_program(f.ir_text, f.config_text);
    return f;
}

inline dcert::Certificate load_golden(const std::string& name)
{
    return dcert::decode_certificate(
            dcert::read_file(fixture_dir() + "/" + name + ".dcert"));
}

inline const std::vector<std::string>& fixture_names()
{
    static const std::vector<std::string> names = {
            "fig1",      "mutual",    "implicit",   "arrays",
            "hierarchy", "libmodel",  "ctx_host_a", "ctx_host_b"};
    return names;
}

using Pairs = std::set<std::pair<std::string, std::string>>;

inline Pairs pairs_of(const dcert::AnalysisContext& ctx, const dcert::FactSet& fs)
{
    Pairs out;
    for (dcert::Fact f : fs) out.insert(ctx.fact_strings(f));
    return out;
}

inline Pairs entry_pairs(const dcert::Certificate& c, const std::string& id)
{
    Pairs out;
    auto it = c.entries.find(id);
    if (it == c.entries.end()) return out;
    for (const auto& pr : it->second) out.insert(pr);
    return out;
}

inline dcert::FactSet make_facts(
        dcert::AnalysisContext& ctx,
        const std::vector<std::pair<std::string, std::string>>& pairs)
{
    dcert::FactSet fs;
    for (const auto& [to, from] : pairs)
        fs.insert(dcert::Fact{ctx.reps().intern_string(to),
                              ctx.reps().intern_string(from)});
    return fs;
}

// Wraps a statement list into a one-method program so statement-level
// operations can be exercised in isolation.
inline std::string one_method(const std::string& body,
                              const std::string& params = "this: T",
                              const std::string& ret = "Int")
{
    std::string text = "class T {\n  method m(" + params + ") -> " + ret
                       + " {\n";
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) text += "    " + line + "\n";
    text += "  }\n}\n";
    return text;
}

} // namespace testutil

#endif
