#ifndef DCERT_ALIAS_HPP
#define DCERT_ALIAS_HPP

// Canonical representatives for l-values. A representative stands for every
// l-value that may alias it:
//
//   simple local x        v:<method>::<x>
//   formal parameter i    p:<i>
//   return value          ret
//   field access o.f      f:<C>.<f>   with C the highest declarer of f
//   array access a[i]     arr:<id>    with id the alias-partition identifier
//   source/sink symbol s  sym:<s>
//
// The string encodings are injective and appear verbatim in certificates.

#include "dcert/errors.hpp"
#include "dcert/graphs.hpp"
#include "dcert/ir.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dcert {

struct Representative {
    enum class Kind { Var, Param, Ret, Field, Array, Sym };

    Kind kind = Kind::Ret;
    std::string owner; // Var: method id; Field: class; Array: partition id;
                       // Sym: symbol name
    std::string name;  // Var: variable name; Field: field name
    int index = -1;    // Param

    static Representative var(const MethodId& m, std::string_view v)
    {
        return {Kind::Var, m.str(), std::string(v), -1};
    }
    static Representative param(int i) { return {Kind::Param, {}, {}, i}; }
    static Representative ret() { return {Kind::Ret, {}, {}, -1}; }
    static Representative field(std::string_view cls, std::string_view f)
    {
        return {Kind::Field, std::string(cls), std::string(f), -1};
    }
    static Representative array(std::string_view partition)
    {
        return {Kind::Array, std::string(partition), {}, -1};
    }
    static Representative sym(std::string_view s)
    {
        return {Kind::Sym, std::string(s), {}, -1};
    }

    std::string encode() const
    {
        switch (kind) {
        case Kind::Var: return "v:" + owner + "::" + name;
        case Kind::Param: return "p:" + std::to_string(index);
        case Kind::Ret: return "ret";
        case Kind::Field: return "f:" + owner + "." + name;
        case Kind::Array: return "arr:" + owner;
        case Kind::Sym: return "sym:" + owner;
        }
        return "?";
    }

    // Inverse of encode. Empty optional when the tag or shape is unknown.
    static std::optional<Representative> decode(std::string_view s)
    {
        auto starts = [&](std::string_view p) {
            return s.size() > p.size() && s.substr(0, p.size()) == p;
        };
        if (s == "ret") return ret();
        if (starts("v:")) {
            auto rest = s.substr(2);
            auto sep = rest.find("::");
            if (sep == std::string_view::npos || sep == 0
                || sep + 2 >= rest.size())
                return std::nullopt;
            return var_raw(rest.substr(0, sep), rest.substr(sep + 2));
        }
        if (starts("p:")) {
            int idx = 0;
            auto digits = s.substr(2);
            if (digits.empty()) return std::nullopt;
            for (char c : digits) {
                if (c < '0' || c > '9') return std::nullopt;
                idx = idx * 10 + (c - '0');
            }
            if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
            return param(idx);
        }
        if (starts("f:")) {
            auto rest = s.substr(2);
            auto dot = rest.rfind('.');
            if (dot == std::string_view::npos || dot == 0
                || dot + 1 >= rest.size())
                return std::nullopt;
            return field(rest.substr(0, dot), rest.substr(dot + 1));
        }
        if (starts("arr:")) return array(s.substr(4));
        if (starts("sym:")) return sym(s.substr(4));
        return std::nullopt;
    }

    friend bool operator==(const Representative& a, const Representative& b)
    {
        return a.kind == b.kind && a.owner == b.owner && a.name == b.name
               && a.index == b.index;
    }
    friend bool operator<(const Representative& a, const Representative& b)
    {
        return a.encode() < b.encode();
    }

private:
    static Representative var_raw(std::string_view m, std::string_view v)
    {
        return {Kind::Var, std::string(m), std::string(v), -1};
    }
};

// Interns representatives to dense ids so fact sets can work on integers.
// Canonical strings stay the single source of truth for ordering and
// serialization.
class RepTable {
public:
    using Id = std::uint32_t;

    Id intern(const Representative& r)
    {
        std::string key = r.encode();
        auto it = by_string_.find(key);
        if (it != by_string_.end()) return it->second;
        Id id = static_cast<Id>(reps_.size());
        reps_.push_back(r);
        strings_.push_back(key);
        by_string_.emplace(std::move(key), id);
        return id;
    }

    // Interns a canonical string, validating the encoding round-trips.
    Id intern_string(std::string_view canon)
    {
        auto it = by_string_.find(std::string(canon));
        if (it != by_string_.end()) return it->second;
        auto r = Representative::decode(canon);
        if (!r || r->encode() != canon)
            throw CertificateError("unknown representative encoding: "
                                   + std::string(canon));
        return intern(*r);
    }

    std::optional<Id> lookup(std::string_view canon) const
    {
        auto it = by_string_.find(std::string(canon));
        if (it == by_string_.end()) return std::nullopt;
        return it->second;
    }

    const Representative& rep(Id id) const { return reps_[id]; }
    const std::string& str(Id id) const { return strings_[id]; }
    size_t size() const { return reps_.size(); }

private:
    std::vector<Representative> reps_;
    std::vector<std::string> strings_;
    std::map<std::string, Id> by_string_;
};

using RepId = RepTable::Id;

// Highest class in the hierarchy of declared_type that declares field f.
inline std::string hoist_field(const Program& p, std::string_view declared_type,
                               std::string_view f)
{
    const ClassDecl* start = p.find_class(declared_type);
    if (!start)
        throw AnalysisError("unknown class '" + std::string(declared_type)
                            + "' in field access ." + std::string(f));
    std::string highest;
    for (const auto& cls : p.superchain(declared_type)) {
        const ClassDecl* c = p.find_class(cls);
        if (c && c->find_field(f)) highest = cls;
    }
    if (highest.empty())
        throw AnalysisError("field '" + std::string(f)
                            + "' not declared anywhere in the hierarchy of "
                            + std::string(declared_type));
    return highest;
}

// ---------------------------------------------------------------------------
// Array alias partition: flow-insensitive union-find over identifiers that
// can hold the same array, closed over copies, call argument bindings,
// return bindings and stores/loads through a common field representative.
// A set's identifier is its lexicographically smallest member name.
// ---------------------------------------------------------------------------

class ArrayPartition {
public:
    // Canonical member names, globally unique:
    //   variable or formal x of m   v:<m>::<x>
    //   return value of m           ret:<m>
    //   field                       f:<C>.<f>
    static std::string var_member(const MethodId& m, std::string_view v)
    {
        return "v:" + m.str() + "::" + std::string(v);
    }
    static std::string ret_member(const MethodId& m)
    {
        return "ret:" + m.str();
    }
    static std::string field_member(std::string_view cls, std::string_view f)
    {
        return "f:" + std::string(cls) + "." + std::string(f);
    }

    // Partition id for a member known to be array-related; empty optional
    // for members never seen near an array.
    std::optional<std::string> partition_id(const std::string& member) const
    {
        auto it = index_.find(member);
        if (it == index_.end()) return std::nullopt;
        int root = find(it->second);
        if (!array_root_[root]) return std::nullopt;
        return root_name_[root];
    }

    size_t set_count() const
    {
        std::set<int> roots;
        for (size_t i = 0; i < parent_.size(); ++i)
            if (array_root_[find(static_cast<int>(i))])
                roots.insert(find(static_cast<int>(i)));
        return roots.size();
    }

    // -- construction --------------------------------------------------------
    int add(const std::string& member)
    {
        auto it = index_.find(member);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(parent_.size());
        index_.emplace(member, id);
        parent_.push_back(id);
        names_.push_back(member);
        return id;
    }

    void unite(const std::string& a, const std::string& b)
    {
        int ra = find(add(a));
        int rb = find(add(b));
        if (ra != rb) parent_[ra] = rb;
    }

    void mark_array(const std::string& member) { array_members_.push_back(member); }

    void seal()
    {
        root_name_.assign(parent_.size(), std::string());
        array_root_.assign(parent_.size(), false);
        // return-value members only bridge unions, they never name a set
        for (size_t i = 0; i < parent_.size(); ++i) {
            if (names_[i].rfind("ret:", 0) == 0) continue;
            int r = find(static_cast<int>(i));
            if (root_name_[r].empty() || names_[i] < root_name_[r])
                root_name_[r] = names_[i];
        }
        for (const auto& m : array_members_) {
            auto it = index_.find(m);
            if (it != index_.end()) array_root_[find(it->second)] = true;
        }
    }

private:
    int find(int x) const
    {
        while (parent_[x] != x) x = parent_[x];
        return x;
    }

    std::map<std::string, int> index_;
    std::vector<int> parent_;
    std::vector<std::string> names_;
    std::vector<std::string> array_members_;
    std::vector<std::string> root_name_;
    std::vector<bool> array_root_;
};

inline ArrayPartition build_array_partition(const Program& p)
{
    ArrayPartition ap;
    for (const Method* m : p.methods()) {
        auto member = [&](const std::string& id) {
            return ArrayPartition::var_member(m->id, id);
        };
        for (const auto& s : m->body) {
            if (auto* ar = s.as<ArrayRead>()) {
                ap.add(member(ar->array));
                ap.mark_array(member(ar->array));
            } else if (auto* aw = s.as<ArrayWrite>()) {
                ap.add(member(aw->array));
                ap.mark_array(member(aw->array));
            } else if (auto* c = s.as<Copy>()) {
                ap.unite(member(c->lhs), member(c->rhs));
            } else if (auto* fr = s.as<FieldRead>()) {
                std::string t = type_of(*m, fr->object);
                if (p.find_class(t)) {
                    std::string cls = hoist_field(p, t, fr->field);
                    ap.unite(member(fr->lhs),
                             ArrayPartition::field_member(cls, fr->field));
                }
            } else if (auto* fw = s.as<FieldWrite>()) {
                std::string t = type_of(*m, fw->object);
                if (p.find_class(t)) {
                    std::string cls = hoist_field(p, t, fw->field);
                    ap.unite(ArrayPartition::field_member(cls, fw->field),
                             member(fw->rhs));
                }
            } else if (auto* call = s.as<Call>()) {
                bool any_external = false;
                auto targets = detail::resolve_concrete_targets(
                        p, *m, *call, &any_external);
                for (const Method* t : targets) {
                    for (size_t i = 0; i < call->args.size(); ++i)
                        ap.unite(member(call->args[i]),
                                 ArrayPartition::var_member(
                                         t->id, t->params[i].name));
                    if (call->return_to)
                        ap.unite(member(*call->return_to),
                                 ArrayPartition::ret_member(t->id));
                }
            } else if (auto* r = s.as<Return>()) {
                if (r->value)
                    ap.unite(ArrayPartition::ret_member(m->id),
                             member(*r->value));
            }
        }
    }
    ap.seal();
    return ap;
}

// ---------------------------------------------------------------------------
// representative(): l-value -> Representative
// ---------------------------------------------------------------------------

struct LValue {
    enum class Kind { Var, FieldAccess, ArrayAccess };
    Kind kind;
    std::string base;  // variable, object or array identifier
    std::string field; // FieldAccess only

    static LValue var(std::string_view v)
    {
        return {Kind::Var, std::string(v), {}};
    }
    static LValue field_access(std::string_view o, std::string_view f)
    {
        return {Kind::FieldAccess, std::string(o), std::string(f)};
    }
    static LValue array_access(std::string_view a)
    {
        return {Kind::ArrayAccess, std::string(a), {}};
    }
};

inline Representative representative(const LValue& lv, const Method& m,
                                     const Program& p, const ArrayPartition& ap)
{
    switch (lv.kind) {
    case LValue::Kind::Var: {
        int idx = m.param_index(lv.base);
        if (idx >= 0) return Representative::param(idx);
        return Representative::var(m.id, lv.base);
    }
    case LValue::Kind::FieldAccess: {
        std::string t = type_of(m, lv.base);
        std::string cls = hoist_field(p, t, lv.field);
        return Representative::field(cls, lv.field);
    }
    case LValue::Kind::ArrayAccess: {
        auto id = ap.partition_id(ArrayPartition::var_member(m.id, lv.base));
        if (!id)
            throw AnalysisError("identifier '" + lv.base
                                + "' is not tracked as an array in "
                                + m.id.str());
        return Representative::array(*id);
    }
    }
    throw AnalysisError("unreachable l-value kind");
}

}

#endif
