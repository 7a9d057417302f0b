#ifndef DCERT_IR_HPP
#define DCERT_IR_HPP

// Object-oriented intermediate representation: a program is a set of classes
// whose method bodies are flat statement lists in a small Jimple-flavoured
// instruction set, plus a taint configuration naming sources, sinks, entry
// points and allow-listed library methods.
//
// Textual form (one statement per line):
//
//   class App extends Object {
//     field buf: Arr
//     method foo/1(this: App) -> String {
//       x := call App.bar/1(this)
//       return x
//     }
//   }
//   extern class TelephonyManager {
//     method getDeviceId/1(this: TelephonyManager) -> String
//   }
//
// Statements:
//   x := const 5          x := const "s"      x := y
//   x := neg y            x := y add z
//   x := a[i]             a[i] := x
//   x := o.f              o.f := x
//   r := call C.m/n(a0, a1)                   call C.m/n(a0)
//   if x > 0 goto L       goto L              label L
//   return x              return
//
// Config file, line based:
//   source C.m/n sym | sink C.m/n sym | entry C.m/n | pure C.m/n

#include "dcert/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dcert {

// ---------------------------------------------------------------------------
// Method identifiers: "Class.name/arity". Ordering is by the canonical string
// so containers, certificates and reports all agree on one order.
// ---------------------------------------------------------------------------

class MethodId {
public:
    MethodId() = default;

    MethodId(std::string cls, std::string name, int arity)
            : cls_(std::move(cls)), name_(std::move(name)), arity_(arity)
    {
        canon_ = cls_ + "." + name_ + "/" + std::to_string(arity_);
    }

    static MethodId parse(std::string_view text)
    {
        auto dot = text.find('.');
        auto slash = text.rfind('/');
        if (dot == std::string_view::npos || slash == std::string_view::npos
            || slash < dot + 2 || dot == 0 || slash + 1 >= text.size()) {
            throw Error("malformed method id: " + std::string(text));
        }
        int arity = 0;
        for (size_t i = slash + 1; i < text.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
                throw Error("malformed method id arity: " + std::string(text));
            }
            arity = arity * 10 + (text[i] - '0');
        }
        return MethodId(std::string(text.substr(0, dot)),
                        std::string(text.substr(dot + 1, slash - dot - 1)),
                        arity);
    }

    const std::string& cls() const { return cls_; }
    const std::string& name() const { return name_; }
    int arity() const { return arity_; }
    const std::string& str() const { return canon_; }
    bool empty() const { return canon_.empty(); }

    friend bool operator==(const MethodId& a, const MethodId& b)
    {
        return a.canon_ == b.canon_;
    }
    friend auto operator<=>(const MethodId& a, const MethodId& b)
    {
        return a.canon_ <=> b.canon_;
    }

private:
    std::string cls_;
    std::string name_;
    int arity_ = 0;
    std::string canon_;
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

enum class UnOp { Neg, Not };
enum class BinOp { Add, Sub, Mul, Div, Rem, And, Or, Xor, Cmp };
enum class CondOp { Gt0, Lt0, Eq0 };

using Literal = std::variant<std::int64_t, std::string>;

struct ConstAssign {
    std::string lhs;
    Literal value;
};
struct Copy {
    std::string lhs, rhs;
};
struct UnaryOp {
    std::string lhs;
    UnOp op;
    std::string rhs;
};
struct BinaryOp {
    std::string lhs;
    BinOp op;
    std::string rhs1, rhs2;
};
struct ArrayRead {
    std::string lhs, array, index;
};
struct ArrayWrite {
    std::string array, index, rhs;
};
struct FieldRead {
    std::string lhs, object, field;
};
struct FieldWrite {
    std::string object, field, rhs;
};
struct Call {
    std::optional<std::string> return_to;
    MethodId callee;
    std::vector<std::string> args; // args[0] is the receiver when present
};
struct Return {
    std::optional<std::string> value; // absent in void methods
};
struct Goto {
    std::string label;
};
struct LabelStmt {
    std::string name;
};
struct CondGoto {
    std::string var;
    CondOp op;
    std::string label;
};

using StmtNode = std::variant<ConstAssign, Copy, UnaryOp, BinaryOp, ArrayRead,
                              ArrayWrite, FieldRead, FieldWrite, Call, Return,
                              Goto, LabelStmt, CondGoto>;

struct Stmt {
    StmtNode node;
    int line = 0;

    template <typename T>
    const T* as() const
    {
        return std::get_if<T>(&node);
    }
    template <typename T>
    bool is() const
    {
        return std::holds_alternative<T>(node);
    }
};

// Variable the statement binds a value to, if any. Call statements bind
// their return-to variable; return/goto/label/cond bind nothing.
inline std::optional<std::string> assigned_var(const Stmt& s)
{
    if (auto* c = s.as<ConstAssign>()) return c->lhs;
    if (auto* c = s.as<Copy>()) return c->lhs;
    if (auto* u = s.as<UnaryOp>()) return u->lhs;
    if (auto* b = s.as<BinaryOp>()) return b->lhs;
    if (auto* a = s.as<ArrayRead>()) return a->lhs;
    if (auto* f = s.as<FieldRead>()) return f->lhs;
    if (auto* c = s.as<Call>()) return c->return_to;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

struct Param {
    std::string name;
    std::string type;
};

struct LocalDecl {
    std::string name;
    std::string type; // inferred; "Object" when inference cannot do better
};

struct Method {
    MethodId id;
    std::vector<Param> params;
    std::string return_type;
    std::vector<LocalDecl> locals;
    std::vector<Stmt> body;
    bool entry_point = false;
    bool external = false; // declaration only, no body

    const Param* find_param(std::string_view name) const
    {
        for (const auto& p : params)
            if (p.name == name) return &p;
        return nullptr;
    }
    int param_index(std::string_view name) const
    {
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i].name == name) return static_cast<int>(i);
        return -1;
    }
    const LocalDecl* find_local(std::string_view name) const
    {
        for (const auto& l : locals)
            if (l.name == name) return &l;
        return nullptr;
    }
};

struct FieldDecl {
    std::string name;
    std::string type;
};

struct ClassDecl {
    std::string name;
    std::optional<std::string> superclass;
    std::vector<std::string> interfaces;
    std::vector<FieldDecl> fields;
    std::vector<Method> methods;
    bool external = false;
    bool is_interface = false;

    const FieldDecl* find_field(std::string_view f) const
    {
        for (const auto& fd : fields)
            if (fd.name == f) return &fd;
        return nullptr;
    }
    const Method* find_method(std::string_view name, int arity) const
    {
        for (const auto& m : methods)
            if (m.id.name() == name && m.id.arity() == arity) return &m;
        return nullptr;
    }
};

struct TaintConfig {
    std::map<MethodId, std::string> sources; // method -> symbol
    std::map<MethodId, std::string> sinks;   // method -> symbol
    std::set<MethodId> allow_list;           // treated as pure
    std::set<MethodId> entry_points;

    bool is_source(const MethodId& m) const { return sources.count(m) != 0; }
    bool is_sink(const MethodId& m) const { return sinks.count(m) != 0; }
    bool is_pure(const MethodId& m) const { return allow_list.count(m) != 0; }

    // All source/sink symbols, sorted and deduplicated.
    std::vector<std::string> symbols() const
    {
        std::set<std::string> out;
        for (const auto& [m, s] : sources) out.insert(s);
        for (const auto& [m, s] : sinks) out.insert(s);
        return {out.begin(), out.end()};
    }
};

inline bool is_builtin_type(std::string_view t)
{
    return t == "Int" || t == "String" || t == "Arr" || t == "Object";
}

class Program {
public:
    std::vector<ClassDecl> classes;
    TaintConfig config;
    std::string digest; // content hash of IR text + config text

    const ClassDecl* find_class(std::string_view name) const
    {
        auto it = class_index_.find(std::string(name));
        return it == class_index_.end() ? nullptr : &classes[it->second];
    }

    // Concrete (body-carrying) methods, sorted by MethodId.
    const std::vector<const Method*>& methods() const { return methods_; }

    const Method* find_method(const MethodId& id) const
    {
        auto it = method_index_.find(id);
        return it == method_index_.end() ? nullptr : it->second;
    }

    // Any declaration with the given id, external ones included.
    const Method* find_declaration(const MethodId& id) const
    {
        return method_in_class(id.cls(), id.name(), id.arity());
    }

    // Indexed (class, name, arity) lookup, external declarations included.
    const Method* method_in_class(std::string_view cls, std::string_view name,
                                  int arity) const
    {
        std::string key = decl_key(cls, name, arity);
        auto it = decl_index_.find(key);
        return it == decl_index_.end() ? nullptr : it->second;
    }

    // c followed by its superclasses up to the root.
    std::vector<std::string> superchain(std::string_view c) const
    {
        const ClassDecl* cd = find_class(c);
        if (!cd) throw AnalysisError("unknown class: " + std::string(c));
        std::vector<std::string> chain;
        while (cd) {
            chain.push_back(cd->name);
            if (!cd->superclass) break;
            cd = find_class(*cd->superclass);
        }
        return chain;
    }

    // Direct subclasses (extends) of c.
    std::vector<std::string> subclasses_of(std::string_view c) const
    {
        std::vector<std::string> out;
        for (const auto& cd : classes)
            if (cd.superclass && *cd.superclass == c) out.push_back(cd.name);
        return out;
    }

    // Classes implementing interface i, directly or via a subinterface.
    std::vector<std::string> implementers_of(std::string_view i) const
    {
        std::set<std::string> ifaces{std::string(i)};
        bool grew = true;
        while (grew) { // pull in subinterfaces
            grew = false;
            for (const auto& cd : classes) {
                if (!cd.is_interface || ifaces.count(cd.name)) continue;
                for (const auto& s : cd.interfaces)
                    if (ifaces.count(s)) {
                        ifaces.insert(cd.name);
                        grew = true;
                    }
                if (cd.superclass && ifaces.count(*cd.superclass)) {
                    ifaces.insert(cd.name);
                    grew = true;
                }
            }
        }
        std::vector<std::string> out;
        for (const auto& cd : classes) {
            if (cd.is_interface) continue;
            for (const auto& s : cd.interfaces)
                if (ifaces.count(s)) {
                    out.push_back(cd.name);
                    break;
                }
        }
        return out;
    }

    void rebuild_indexes()
    {
        class_index_.clear();
        method_index_.clear();
        methods_.clear();
        decl_index_.clear();
        for (size_t i = 0; i < classes.size(); ++i)
            class_index_[classes[i].name] = i;
        for (auto& c : classes)
            for (auto& m : c.methods) {
                if (!m.external) method_index_[m.id] = &m;
                decl_index_[decl_key(c.name, m.id.name(), m.id.arity())] = &m;
            }
        for (auto& [id, m] : method_index_) methods_.push_back(m);
    }

private:
    static std::string decl_key(std::string_view cls, std::string_view name,
                                int arity)
    {
        std::string key;
        key.reserve(cls.size() + name.size() + 8);
        key.append(cls);
        key.push_back('\x1f');
        key.append(name);
        key.push_back('/');
        key.append(std::to_string(arity));
        return key;
    }

    std::map<std::string, size_t> class_index_;
    std::map<MethodId, const Method*> method_index_; // concrete only
    std::map<std::string, const Method*> decl_index_;
    std::vector<const Method*> methods_;
};

inline std::vector<std::string> superchain(const Program& p, std::string_view c)
{
    return p.superchain(c);
}

// Declared type of an identifier inside a method: parameter type or inferred
// local type. Empty string when the identifier is unknown.
inline std::string type_of(const Method& m, std::string_view id)
{
    if (const Param* p = m.find_param(id)) return p->type;
    if (const LocalDecl* l = m.find_local(id)) return l->type;
    return {};
}

// ---------------------------------------------------------------------------
// Digest: FNV-1a over the raw IR and config bytes, binds certificates to the
// exact analyzed text.
// ---------------------------------------------------------------------------

inline std::string program_digest(std::string_view ir_text,
                                  std::string_view config_text)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    mix(ir_text);
    mix(config_text);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

inline const std::set<std::string>& keywords()
{
    static const std::set<std::string> kw = {
            "class", "extern", "interface", "extends", "implements", "method",
            "field", "const", "call", "neg", "not", "add", "sub", "mul",
            "div", "rem", "and", "or", "xor", "cmp", "if", "goto", "label",
            "return", "ret", "void"};
    return kw;
}

inline std::optional<UnOp> un_op(std::string_view s)
{
    if (s == "neg") return UnOp::Neg;
    if (s == "not") return UnOp::Not;
    return std::nullopt;
}

inline std::optional<BinOp> bin_op(std::string_view s)
{
    if (s == "add") return BinOp::Add;
    if (s == "sub") return BinOp::Sub;
    if (s == "mul") return BinOp::Mul;
    if (s == "div") return BinOp::Div;
    if (s == "rem") return BinOp::Rem;
    if (s == "and") return BinOp::And;
    if (s == "or") return BinOp::Or;
    if (s == "xor") return BinOp::Xor;
    if (s == "cmp") return BinOp::Cmp;
    return std::nullopt;
}

inline std::string_view un_op_name(UnOp op)
{
    switch (op) {
    case UnOp::Neg: return "neg";
    case UnOp::Not: return "not";
    }
    return "?";
}

inline std::string_view bin_op_name(BinOp op)
{
    switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Div: return "div";
    case BinOp::Rem: return "rem";
    case BinOp::And: return "and";
    case BinOp::Or: return "or";
    case BinOp::Xor: return "xor";
    case BinOp::Cmp: return "cmp";
    }
    return "?";
}

struct Token {
    enum class Kind {
        Ident,   // identifier or keyword
        Int,
        Str,
        Punct,   // one of := : . , ( ) [ ] { } -> / > < =
        Newline,
        End
    };
    Kind kind = Kind::End;
    std::string text;
    std::int64_t int_value = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token next()
    {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance()
    {
        skip_space_and_comments();
        tok_ = Token{};
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.kind = Token::Kind::End;
            return;
        }
        char c = src_[pos_];
        if (c == '\n') {
            consume();
            tok_.kind = Token::Kind::Newline;
            tok_.text = "\n";
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (pos_ < src_.size()
                   && (std::isalnum(static_cast<unsigned char>(src_[pos_]))
                       || src_[pos_] == '_')) {
                id += src_[pos_];
                consume();
            }
            tok_.kind = Token::Kind::Ident;
            tok_.text = std::move(id);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c))
            || (c == '-' && pos_ + 1 < src_.size()
                && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::string num;
            if (c == '-') {
                num += c;
                consume();
            }
            while (pos_ < src_.size()
                   && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                num += src_[pos_];
                consume();
            }
            tok_.kind = Token::Kind::Int;
            tok_.text = num;
            tok_.int_value = std::stoll(num);
            return;
        }
        if (c == '"') {
            consume();
            std::string s;
            while (pos_ < src_.size() && src_[pos_] != '"'
                   && src_[pos_] != '\n') {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) consume();
                s += src_[pos_];
                consume();
            }
            if (pos_ >= src_.size() || src_[pos_] != '"') {
                throw ParseError("unterminated string literal", tok_.line,
                                 tok_.col);
            }
            consume();
            tok_.kind = Token::Kind::Str;
            tok_.text = std::move(s);
            return;
        }
        // multi-char punctuation first
        if (c == ':' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
            consume();
            consume();
            tok_.kind = Token::Kind::Punct;
            tok_.text = ":=";
            return;
        }
        if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
            consume();
            consume();
            tok_.kind = Token::Kind::Punct;
            tok_.text = "->";
            return;
        }
        static const std::string singles = ":.,()[]{}/<>=";
        if (singles.find(c) != std::string::npos) {
            consume();
            tok_.kind = Token::Kind::Punct;
            tok_.text = std::string(1, c);
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'",
                         line_, col_);
    }

    void skip_space_and_comments()
    {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') consume();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                consume();
            } else {
                break;
            }
        }
    }

    void consume()
    {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

class IrParser {
public:
    explicit IrParser(std::string_view text) : lex_(text) {}

    Program parse()
    {
        Program p;
        skip_newlines();
        while (lex_.peek().kind != Token::Kind::End) {
            bool external = false;
            if (at_ident("extern")) {
                lex_.next();
                external = true;
            }
            if (at_ident("interface")) {
                p.classes.push_back(parse_class(false, true));
            } else if (at_ident("class")) {
                p.classes.push_back(parse_class(external, false));
            } else {
                fail("expected 'class', 'extern class' or 'interface'");
            }
            skip_newlines();
        }
        finalize(p);
        return p;
    }

private:
    [[noreturn]] void fail(const std::string& msg)
    {
        throw ParseError(msg, lex_.peek().line, lex_.peek().col);
    }

    bool at_ident(std::string_view s) const
    {
        return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == s;
    }
    bool at_punct(std::string_view s) const
    {
        return lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == s;
    }

    Token expect_ident()
    {
        if (lex_.peek().kind != Token::Kind::Ident)
            fail("expected identifier, got '" + lex_.peek().text + "'");
        Token t = lex_.next();
        if (keywords().count(t.text))
            throw ParseError("reserved word '" + t.text
                                     + "' cannot be used as an identifier",
                             t.line, t.col);
        return t;
    }

    Token expect_punct(std::string_view s)
    {
        if (!at_punct(s))
            fail("expected '" + std::string(s) + "', got '" + lex_.peek().text
                 + "'");
        return lex_.next();
    }

    void skip_newlines()
    {
        while (lex_.peek().kind == Token::Kind::Newline) lex_.next();
    }

    void expect_line_end()
    {
        if (lex_.peek().kind == Token::Kind::End) return;
        if (lex_.peek().kind != Token::Kind::Newline)
            fail("expected end of line, got '" + lex_.peek().text + "'");
        skip_newlines();
    }

    ClassDecl parse_class(bool external, bool is_interface)
    {
        lex_.next(); // 'class' or 'interface'
        ClassDecl c;
        c.external = external;
        c.is_interface = is_interface;
        c.name = expect_ident().text;
        if (at_ident("extends")) {
            lex_.next();
            c.superclass = expect_ident().text;
        }
        if (at_ident("implements")) {
            lex_.next();
            c.interfaces.push_back(expect_ident().text);
            while (at_punct(",")) {
                lex_.next();
                c.interfaces.push_back(expect_ident().text);
            }
        }
        expect_punct("{");
        skip_newlines();
        while (!at_punct("}")) {
            if (at_ident("field")) {
                if (is_interface) fail("interfaces cannot declare fields");
                lex_.next();
                FieldDecl f;
                f.name = expect_ident().text;
                expect_punct(":");
                f.type = expect_ident().text;
                if (c.find_field(f.name))
                    fail("duplicate field '" + f.name + "' in class "
                         + c.name);
                c.fields.push_back(std::move(f));
                expect_line_end();
            } else if (at_ident("method")) {
                Method m = parse_method(c.name, external || is_interface);
                if (c.find_method(m.id.name(), m.id.arity()))
                    fail("duplicate method " + m.id.str());
                c.methods.push_back(std::move(m));
                skip_newlines();
            } else {
                fail("expected 'field', 'method' or '}'");
            }
        }
        lex_.next(); // '}'
        return c;
    }

    Method parse_method(const std::string& cls, bool external)
    {
        lex_.next(); // 'method'
        Method m;
        m.external = external;
        Token nameTok = expect_ident();
        std::optional<int> declared_arity;
        if (at_punct("/")) {
            lex_.next();
            if (lex_.peek().kind != Token::Kind::Int) fail("expected arity");
            declared_arity = static_cast<int>(lex_.next().int_value);
        }
        expect_punct("(");
        if (!at_punct(")")) {
            parse_param(m, cls);
            while (at_punct(",")) {
                lex_.next();
                parse_param(m, cls);
            }
        }
        expect_punct(")");
        expect_punct("->");
        if (at_ident("void"))
            m.return_type = lex_.next().text;
        else
            m.return_type = expect_ident().text;
        if (declared_arity && *declared_arity != static_cast<int>(m.params.size()))
            fail("declared arity /" + std::to_string(*declared_arity)
                 + " does not match parameter count for method "
                 + nameTok.text);
        m.id = MethodId(cls, nameTok.text, static_cast<int>(m.params.size()));

        if (external) {
            expect_line_end();
            return m;
        }
        expect_punct("{");
        expect_line_end();
        while (!at_punct("}")) {
            if (lex_.peek().kind == Token::Kind::End)
                fail("unterminated method body");
            m.body.push_back(parse_stmt());
            expect_line_end();
        }
        lex_.next(); // '}'
        return m;
    }

    void parse_param(Method& m, const std::string& cls)
    {
        Token name = expect_ident();
        std::string type;
        if (at_punct(":")) {
            lex_.next();
            type = expect_ident().text;
        } else if (m.params.empty()) {
            type = cls; // bare receiver: typed as the enclosing class
        } else {
            fail("parameter '" + name.text + "' needs a type annotation");
        }
        if (m.find_param(name.text))
            throw ParseError("duplicate parameter '" + name.text + "'",
                             name.line, name.col);
        m.params.push_back(Param{name.text, type});
    }

    Stmt parse_stmt()
    {
        Stmt s;
        s.line = lex_.peek().line;
        if (at_ident("call")) {
            lex_.next();
            s.node = parse_call(std::nullopt);
            return s;
        }
        if (at_ident("goto")) {
            lex_.next();
            s.node = Goto{expect_ident().text};
            return s;
        }
        if (at_ident("label")) {
            lex_.next();
            s.node = LabelStmt{expect_ident().text};
            return s;
        }
        if (at_ident("return")) {
            lex_.next();
            if (lex_.peek().kind == Token::Kind::Ident)
                s.node = Return{expect_ident().text};
            else
                s.node = Return{std::nullopt};
            return s;
        }
        if (at_ident("if")) {
            lex_.next();
            CondGoto c;
            c.var = expect_ident().text;
            if (at_punct(">"))
                c.op = CondOp::Gt0;
            else if (at_punct("<"))
                c.op = CondOp::Lt0;
            else if (at_punct("="))
                c.op = CondOp::Eq0;
            else
                fail("expected '>', '<' or '=' in condition");
            lex_.next();
            if (lex_.peek().kind != Token::Kind::Int
                || lex_.peek().int_value != 0)
                fail("conditions compare against 0");
            lex_.next();
            if (!at_ident("goto")) fail("expected 'goto'");
            lex_.next();
            c.label = expect_ident().text;
            s.node = std::move(c);
            return s;
        }

        // assignment forms, all starting with an identifier
        std::string first = expect_ident().text;
        if (at_punct("[")) { // a[i] := x
            lex_.next();
            std::string idx = expect_ident().text;
            expect_punct("]");
            expect_punct(":=");
            s.node = ArrayWrite{first, idx, expect_ident().text};
            return s;
        }
        if (at_punct(".")) { // o.f := x
            lex_.next();
            std::string field = expect_ident().text;
            expect_punct(":=");
            s.node = FieldWrite{first, field, expect_ident().text};
            return s;
        }
        expect_punct(":=");
        if (at_ident("const")) {
            lex_.next();
            if (lex_.peek().kind == Token::Kind::Int)
                s.node = ConstAssign{first, Literal{lex_.next().int_value}};
            else if (lex_.peek().kind == Token::Kind::Str)
                s.node = ConstAssign{first, Literal{lex_.next().text}};
            else
                fail("expected integer or string literal after 'const'");
            return s;
        }
        if (at_ident("call")) {
            lex_.next();
            s.node = parse_call(first);
            return s;
        }
        if (lex_.peek().kind == Token::Kind::Ident
            && un_op(lex_.peek().text)) {
            UnOp op = *un_op(lex_.next().text);
            s.node = UnaryOp{first, op, expect_ident().text};
            return s;
        }
        std::string rhs = expect_ident().text;
        if (at_punct("[")) { // x := a[i]
            lex_.next();
            std::string idx = expect_ident().text;
            expect_punct("]");
            s.node = ArrayRead{first, rhs, idx};
            return s;
        }
        if (at_punct(".")) { // x := o.f
            lex_.next();
            s.node = FieldRead{first, rhs, expect_ident().text};
            return s;
        }
        if (lex_.peek().kind == Token::Kind::Ident
            && bin_op(lex_.peek().text)) {
            BinOp op = *bin_op(lex_.next().text);
            s.node = BinaryOp{first, op, rhs, expect_ident().text};
            return s;
        }
        s.node = Copy{first, rhs};
        return s;
    }

    Call parse_call(std::optional<std::string> return_to)
    {
        Call c;
        c.return_to = std::move(return_to);
        std::string cls = expect_ident().text;
        expect_punct(".");
        std::string name = expect_ident().text;
        expect_punct("/");
        if (lex_.peek().kind != Token::Kind::Int)
            fail("expected arity after '/'");
        int arity = static_cast<int>(lex_.next().int_value);
        expect_punct("(");
        if (!at_punct(")")) {
            c.args.push_back(expect_ident().text);
            while (at_punct(",")) {
                lex_.next();
                c.args.push_back(expect_ident().text);
            }
        }
        expect_punct(")");
        if (static_cast<int>(c.args.size()) != arity)
            fail("call to " + cls + "." + name + "/" + std::to_string(arity)
                 + " passes " + std::to_string(c.args.size()) + " arguments");
        c.callee = MethodId(cls, name, arity);
        return c;
    }

    // -- validation and local inference -------------------------------------

    void finalize(Program& p)
    {
        // register the implicit root class unless declared
        bool has_object = false;
        for (const auto& c : p.classes)
            if (c.name == "Object") has_object = true;
        if (!has_object) {
            ClassDecl obj;
            obj.name = "Object";
            obj.external = true;
            p.classes.push_back(std::move(obj));
        }

        std::map<std::string, const ClassDecl*> by_name;
        for (const auto& c : p.classes) {
            if (by_name.count(c.name))
                throw ParseError("duplicate class '" + c.name + "'", 0, 0);
            by_name[c.name] = &c;
        }

        auto known_type = [&](const std::string& t) {
            return is_builtin_type(t) || by_name.count(t) != 0;
        };

        for (const auto& c : p.classes) {
            if (c.superclass && !by_name.count(*c.superclass))
                throw ParseError("unknown type '" + *c.superclass
                                         + "' in extends clause of " + c.name,
                                 0, 0);
            for (const auto& i : c.interfaces) {
                auto it = by_name.find(i);
                if (it == by_name.end() || !it->second->is_interface)
                    throw ParseError("'" + i + "' is not a declared interface",
                                     0, 0);
            }
            for (const auto& f : c.fields)
                if (!known_type(f.type))
                    throw ParseError("unknown type '" + f.type + "' for field "
                                             + c.name + "." + f.name,
                                     0, 0);
            for (const auto& m : c.methods) {
                for (const auto& pa : m.params)
                    if (!known_type(pa.type))
                        throw ParseError("unknown type '" + pa.type
                                                 + "' in parameters of "
                                                 + m.id.str(),
                                         0, 0);
                if (m.return_type != "void" && !known_type(m.return_type))
                    throw ParseError("unknown return type '" + m.return_type
                                             + "' of " + m.id.str(),
                                     0, 0);
            }
        }

        // acyclic extends
        for (const auto& c : p.classes) {
            std::set<std::string> seen{c.name};
            const ClassDecl* cur = &c;
            while (cur->superclass) {
                const ClassDecl* up = by_name.at(*cur->superclass);
                if (!seen.insert(up->name).second)
                    throw ParseError("cyclic extends involving class '"
                                             + up->name + "'",
                                     0, 0);
                cur = up;
            }
        }

        for (auto& c : p.classes)
            for (auto& m : c.methods)
                if (!m.external) finalize_method(p, by_name, m);

        p.rebuild_indexes();

        // method ids must be globally unique; per-class uniqueness plus
        // unique class names already guarantee it, assert cheaply
        std::set<std::string> ids;
        for (const auto& c : p.classes)
            for (const auto& m : c.methods)
                if (!ids.insert(m.id.str()).second)
                    throw ParseError("duplicate method id " + m.id.str(), 0,
                                     0);
    }

    void finalize_method(Program& p,
                         const std::map<std::string, const ClassDecl*>& by_name,
                         Method& m)
    {
        // labels: declared exactly once, targets exist
        std::map<std::string, int> labels;
        for (size_t i = 0; i < m.body.size(); ++i) {
            if (auto* l = m.body[i].as<LabelStmt>()) {
                if (labels.count(l->name))
                    throw ParseError("duplicate label '" + l->name + "' in "
                                             + m.id.str(),
                                     m.body[i].line, 1);
                labels[l->name] = static_cast<int>(i);
            }
        }
        auto check_label = [&](const std::string& l, int line) {
            if (!labels.count(l))
                throw ParseError("undefined label '" + l + "' in "
                                         + m.id.str(),
                                 line, 1);
        };
        for (const auto& s : m.body) {
            if (auto* g = s.as<Goto>()) check_label(g->label, s.line);
            if (auto* c = s.as<CondGoto>()) check_label(c->label, s.line);
        }

        // implicit locals: assigned identifiers that are not parameters
        std::set<std::string> local_names;
        for (const auto& s : m.body)
            if (auto v = assigned_var(s))
                if (!m.find_param(*v)) local_names.insert(*v);

        auto declared = [&](const std::string& id) {
            return m.find_param(id) != nullptr || local_names.count(id) != 0;
        };
        auto check_id = [&](const std::string& id, int line) {
            if (!declared(id))
                throw ParseError("undeclared identifier '" + id + "' in "
                                         + m.id.str(),
                                 line, 1);
        };
        for (const auto& s : m.body) {
            std::visit(
                    [&](const auto& n) {
                        using T = std::decay_t<decltype(n)>;
                        if constexpr (std::is_same_v<T, Copy>)
                            check_id(n.rhs, s.line);
                        else if constexpr (std::is_same_v<T, UnaryOp>)
                            check_id(n.rhs, s.line);
                        else if constexpr (std::is_same_v<T, BinaryOp>) {
                            check_id(n.rhs1, s.line);
                            check_id(n.rhs2, s.line);
                        } else if constexpr (std::is_same_v<T, ArrayRead>) {
                            check_id(n.array, s.line);
                            check_id(n.index, s.line);
                        } else if constexpr (std::is_same_v<T, ArrayWrite>) {
                            check_id(n.array, s.line);
                            check_id(n.index, s.line);
                            check_id(n.rhs, s.line);
                        } else if constexpr (std::is_same_v<T, FieldRead>)
                            check_id(n.object, s.line);
                        else if constexpr (std::is_same_v<T, FieldWrite>) {
                            check_id(n.object, s.line);
                            check_id(n.rhs, s.line);
                        } else if constexpr (std::is_same_v<T, Call>) {
                            for (const auto& a : n.args) check_id(a, s.line);
                            if (!by_name.count(n.callee.cls()))
                                throw ParseError("unknown type '"
                                                         + n.callee.cls()
                                                         + "' in call",
                                                 s.line, 1);
                        } else if constexpr (std::is_same_v<T, Return>) {
                            if (n.value) check_id(*n.value, s.line);
                        } else if constexpr (std::is_same_v<T, CondGoto>)
                            check_id(n.var, s.line);
                    },
                    s.node);
        }

        // return discipline
        bool is_void = m.return_type == "void";
        for (const auto& s : m.body) {
            if (auto* r = s.as<Return>()) {
                if (is_void && r->value)
                    throw ParseError("void method " + m.id.str()
                                             + " cannot return a value",
                                     s.line, 1);
                if (!is_void && !r->value)
                    throw ParseError("method " + m.id.str()
                                             + " must return a value",
                                     s.line, 1);
            }
        }
        check_fallthrough(m, labels, is_void);

        infer_local_types(p, by_name, m, local_names);
    }

    // Every path must end in a return. Void methods get a trailing bare
    // return appended when control can fall off the end.
    void check_fallthrough(Method& m, const std::map<std::string, int>& labels,
                           bool is_void)
    {
        auto falls_to_end = [&]() {
            if (m.body.empty()) return !is_void ? false : true;
            const Stmt& last = m.body.back();
            return !(last.is<Return>() || last.is<Goto>());
        };
        if (m.body.empty()) {
            if (is_void) m.body.push_back(Stmt{Return{std::nullopt}, 0});
            return;
        }
        if (falls_to_end()) {
            if (is_void) {
                m.body.push_back(Stmt{Return{std::nullopt}, 0});
            } else {
                throw ParseError("control can fall off the end of non-void "
                                 "method "
                                         + m.id.str(),
                                 m.body.back().line, 1);
            }
        }
        (void)labels;
    }

    void infer_local_types(Program& p,
                           const std::map<std::string, const ClassDecl*>& by_name,
                           Method& m, const std::set<std::string>& local_names)
    {
        std::map<std::string, std::string> ty;
        auto type_of_id = [&](const std::string& id) -> std::string {
            if (const Param* pa = m.find_param(id)) return pa->type;
            auto it = ty.find(id);
            return it == ty.end() ? std::string() : it->second;
        };
        auto field_type = [&](const std::string& obj_type,
                              const std::string& field) -> std::string {
            const ClassDecl* c =
                    by_name.count(obj_type) ? by_name.at(obj_type) : nullptr;
            while (c) {
                if (const FieldDecl* f = c->find_field(field)) return f->type;
                c = c->superclass && by_name.count(*c->superclass)
                            ? by_name.at(*c->superclass)
                            : nullptr;
            }
            return {};
        };
        auto callee_return = [&](const MethodId& id) -> std::string {
            const ClassDecl* c =
                    by_name.count(id.cls()) ? by_name.at(id.cls()) : nullptr;
            while (c) {
                if (const Method* cm = c->find_method(id.name(), id.arity()))
                    return cm->return_type;
                c = c->superclass && by_name.count(*c->superclass)
                            ? by_name.at(*c->superclass)
                            : nullptr;
            }
            return {};
        };

        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& s : m.body) {
                auto lhs = assigned_var(s);
                if (!lhs || m.find_param(*lhs)) continue;
                if (!ty[*lhs].empty()) continue;
                std::string t;
                if (auto* c = s.as<ConstAssign>())
                    t = std::holds_alternative<std::int64_t>(c->value)
                                ? "Int"
                                : "String";
                else if (auto* c = s.as<Copy>())
                    t = type_of_id(c->rhs);
                else if (s.is<UnaryOp>() || s.is<BinaryOp>())
                    t = "Int";
                else if (auto* f = s.as<FieldRead>())
                    t = field_type(type_of_id(f->object), f->field);
                else if (auto* c = s.as<Call>())
                    t = callee_return(c->callee);
                // array reads stay untyped: element types are not declared
                if (!t.empty() && t != "void" && ty[*lhs] != t) {
                    ty[*lhs] = t;
                    changed = true;
                }
            }
        }
        (void)p;
        for (const auto& n : local_names) {
            std::string t = ty.count(n) && !ty[n].empty() ? ty[n] : "Object";
            m.locals.push_back(LocalDecl{n, t});
        }
        std::sort(m.locals.begin(), m.locals.end(),
                  [](const LocalDecl& a, const LocalDecl& b) {
                      return a.name < b.name;
                  });
    }

    Lexer lex_;
};

} // namespace detail

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

inline TaintConfig parse_taint_config(std::string_view text)
{
    TaintConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        std::string mid, sym;
        if (!(ls >> mid))
            throw ParseError("expected method id after '" + kind + "'",
                             lineno, 1);
        MethodId id;
        try {
            id = MethodId::parse(mid);
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno, 1);
        }
        if (kind == "source" || kind == "sink") {
            if (!(ls >> sym))
                throw ParseError("expected symbol name after method id",
                                 lineno, 1);
            auto& m = kind == "source" ? cfg.sources : cfg.sinks;
            auto [it, fresh] = m.emplace(id, sym);
            if (!fresh && it->second != sym)
                throw ParseError("conflicting symbol for " + id.str(), lineno,
                                 1);
        } else if (kind == "entry") {
            cfg.entry_points.insert(id);
        } else if (kind == "pure") {
            cfg.allow_list.insert(id);
        } else {
            throw ParseError("unknown config directive '" + kind + "'",
                             lineno, 1);
        }
        std::string extra;
        if (ls >> extra)
            throw ParseError("trailing tokens on config line", lineno, 1);
    }
    // a method cannot be both source and sink, and the two symbol sets
    // must not overlap
    for (const auto& [m, s] : cfg.sources) {
        if (cfg.sinks.count(m))
            throw ParseError("method " + m.str()
                                     + " configured as both source and sink",
                             0, 0);
    }
    std::set<std::string> src_syms, sink_syms;
    for (const auto& [m, s] : cfg.sources) src_syms.insert(s);
    for (const auto& [m, s] : cfg.sinks) sink_syms.insert(s);
    for (const auto& s : src_syms)
        if (sink_syms.count(s))
            throw ParseError("symbol '" + s
                                     + "' used for both a source and a sink",
                             0, 0);
    return cfg;
}

// ---------------------------------------------------------------------------
// parse_program: IR text + config text -> validated Program
// ---------------------------------------------------------------------------

inline Program parse_program(std::string_view ir_text,
                             std::string_view config_text = {})
{
    detail::IrParser parser(ir_text);
    Program p = parser.parse();
    p.config = parse_taint_config(config_text);
    p.digest = program_digest(ir_text, config_text);
    for (const auto& e : p.config.entry_points) {
        const Method* m = p.find_method(e);
        if (!m)
            throw ParseError("entry point " + e.str()
                                     + " is not a concrete method",
                             0, 0);
        const_cast<Method*>(m)->entry_point = true;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Printer: canonical normal form, reparses to an identical program.
// ---------------------------------------------------------------------------

namespace detail {

inline void print_stmt(std::ostream& os, const Stmt& s)
{
    std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, ConstAssign>) {
                    os << n.lhs << " := const ";
                    if (std::holds_alternative<std::int64_t>(n.value))
                        os << std::get<std::int64_t>(n.value);
                    else
                        os << '"' << std::get<std::string>(n.value) << '"';
                } else if constexpr (std::is_same_v<T, Copy>)
                    os << n.lhs << " := " << n.rhs;
                else if constexpr (std::is_same_v<T, UnaryOp>)
                    os << n.lhs << " := " << un_op_name(n.op) << ' ' << n.rhs;
                else if constexpr (std::is_same_v<T, BinaryOp>)
                    os << n.lhs << " := " << n.rhs1 << ' ' << bin_op_name(n.op)
                       << ' ' << n.rhs2;
                else if constexpr (std::is_same_v<T, ArrayRead>)
                    os << n.lhs << " := " << n.array << '[' << n.index << ']';
                else if constexpr (std::is_same_v<T, ArrayWrite>)
                    os << n.array << '[' << n.index << "] := " << n.rhs;
                else if constexpr (std::is_same_v<T, FieldRead>)
                    os << n.lhs << " := " << n.object << '.' << n.field;
                else if constexpr (std::is_same_v<T, FieldWrite>)
                    os << n.object << '.' << n.field << " := " << n.rhs;
                else if constexpr (std::is_same_v<T, Call>) {
                    if (n.return_to) os << *n.return_to << " := ";
                    os << "call " << n.callee.str() << '(';
                    for (size_t i = 0; i < n.args.size(); ++i) {
                        if (i) os << ", ";
                        os << n.args[i];
                    }
                    os << ')';
                } else if constexpr (std::is_same_v<T, Return>) {
                    os << "return";
                    if (n.value) os << ' ' << *n.value;
                } else if constexpr (std::is_same_v<T, Goto>)
                    os << "goto " << n.label;
                else if constexpr (std::is_same_v<T, LabelStmt>)
                    os << "label " << n.name;
                else if constexpr (std::is_same_v<T, CondGoto>) {
                    os << "if " << n.var << ' ';
                    switch (n.op) {
                    case CondOp::Gt0: os << "> 0"; break;
                    case CondOp::Lt0: os << "< 0"; break;
                    case CondOp::Eq0: os << "= 0"; break;
                    }
                    os << " goto " << n.label;
                }
            },
            s.node);
}

} // namespace detail

inline std::string print_stmt(const Stmt& s)
{
    std::ostringstream os;
    detail::print_stmt(os, s);
    return os.str();
}

inline std::string print_program(const Program& p)
{
    std::ostringstream os;
    for (const auto& c : p.classes) {
        if (c.name == "Object" && c.external && c.methods.empty()
            && c.fields.empty())
            continue; // implicit root
        if (c.is_interface)
            os << "interface " << c.name;
        else
            os << (c.external ? "extern class " : "class ") << c.name;
        if (c.superclass) os << " extends " << *c.superclass;
        if (!c.interfaces.empty()) {
            os << " implements ";
            for (size_t i = 0; i < c.interfaces.size(); ++i) {
                if (i) os << ", ";
                os << c.interfaces[i];
            }
        }
        os << " {\n";
        for (const auto& f : c.fields)
            os << "  field " << f.name << ": " << f.type << '\n';
        for (const auto& m : c.methods) {
            os << "  method " << m.id.name() << '/' << m.id.arity() << '(';
            for (size_t i = 0; i < m.params.size(); ++i) {
                if (i) os << ", ";
                os << m.params[i].name << ": " << m.params[i].type;
            }
            os << ") -> " << m.return_type;
            if (m.external) {
                os << '\n';
                continue;
            }
            os << " {\n";
            for (const auto& s : m.body) {
                os << "    ";
                detail::print_stmt(os, s);
                os << '\n';
            }
            os << "  }\n";
        }
        os << "}\n";
    }
    return os.str();
}

inline std::string print_taint_config(const TaintConfig& cfg)
{
    std::ostringstream os;
    for (const auto& [m, s] : cfg.sources)
        os << "source " << m.str() << ' ' << s << '\n';
    for (const auto& [m, s] : cfg.sinks)
        os << "sink " << m.str() << ' ' << s << '\n';
    for (const auto& m : cfg.allow_list) os << "pure " << m.str() << '\n';
    for (const auto& m : cfg.entry_points) os << "entry " << m.str() << '\n';
    return os.str();
}

}

#endif
