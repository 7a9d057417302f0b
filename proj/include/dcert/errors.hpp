#ifndef DCERT_ERRORS_HPP
#define DCERT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dcert {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Syntax or well-formedness problem in IR or taint-config text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int col)
            : Error("parse error at " + std::to_string(line) + ":"
                    + std::to_string(col) + ": " + what),
              line_(line), col_(col)
    {
    }

    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_;
    int col_;
};

// Problem discovered while building graphs, representatives or summaries
// (unknown method, field not found in a hierarchy, ...).
class AnalysisError : public Error {
public:
    using Error::Error;
};

// Malformed, truncated or incompatible certificate file.
class CertificateError : public Error {
public:
    using Error::Error;
};

}

#endif
