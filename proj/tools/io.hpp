#pragma once

#include <rhomix/rhomix.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace rhomix::io {

using json = nlohmann::json;

inline json load_json(const std::string& path)
{
    std::ifstream in(path);
    require(bool(in), ErrorKind::invalid_input, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, path + ": " + e.what());
    }
}

/** Number, decimal string, or "a/b" fraction string. */
inline double parse_number(const json& v)
{
    if (v.is_number()) return v.get<double>();
    require(v.is_string(), ErrorKind::invalid_input, "expected a number or numeric string");
    const std::string s = v.get<std::string>();
    auto to_double = [&](const std::string& t) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == t.size() && !t.empty(), ErrorKind::invalid_input, "not a number: '" + s + "'");
        return x;
    };
    auto slash = s.find('/');
    if (slash == std::string::npos) return to_double(s);
    double den = to_double(s.substr(slash + 1));
    require(den != 0.0, ErrorKind::invalid_input, "zero denominator in '" + s + "'");
    return to_double(s.substr(0, slash)) / den;
}

inline Matrix parse_matrix(const json& rows, const char* what)
{
    require(rows.is_array() && !rows.empty() && rows[0].is_array(), ErrorKind::invalid_input,
            std::string(what) + " must be a nonempty array of rows");
    const Index N = Index(rows.size()), M = Index(rows[0].size());
    Matrix m(N, M);
    for (Index r = 0; r < N; ++r) {
        require(rows[std::size_t(r)].is_array() && Index(rows[std::size_t(r)].size()) == M, ErrorKind::invalid_input,
                std::string(what) + " rows must have equal length");
        for (Index c = 0; c < M; ++c) m(r, c) = parse_number(rows[std::size_t(r)][std::size_t(c)]);
    }
    return m;
}

inline std::vector<std::string> string_list(const json& j, const char* key)
{
    std::vector<std::string> out;
    if (j.contains(key))
        for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
    return out;
}

/** {"labels_x": [...], "labels_y": [...], "joint": [[...]]} */
inline FinitePair read_pair(const json& j)
{
    require(j.contains("joint"), ErrorKind::invalid_input, "pair needs a 'joint' table");
    FinitePair p = make_pair(parse_matrix(j.at("joint"), "joint"));
    auto lx = string_list(j, "labels_x"), ly = string_list(j, "labels_y");
    if (!lx.empty()) {
        require(Index(lx.size()) == p.joint.rows(), ErrorKind::invalid_input, "labels_x length mismatch");
        p.labels_x = lx;
    }
    if (!ly.empty()) {
        require(Index(ly.size()) == p.joint.cols(), ErrorKind::invalid_input, "labels_y length mismatch");
        p.labels_y = ly;
    }
    validate(p);
    return p;
}

/** {"variables": [{"name":, "size":}], "joint_flat": [...]}, last variable fastest. */
inline FiniteSystem read_system(const json& j)
{
    require(j.contains("variables") && j.contains("joint_flat"), ErrorKind::invalid_input,
            "system needs 'variables' and 'joint_flat'");
    if (j.contains("order"))
        require(j.at("order").get<std::string>().rfind("row-major", 0) == 0, ErrorKind::invalid_input,
                "only row-major order (last variable fastest) is supported");
    std::vector<Variable> vars;
    for (const auto& v : j.at("variables")) vars.push_back({v.at("name").get<std::string>(), v.at("size").get<int>()});
    std::vector<double> joint;
    for (const auto& x : j.at("joint_flat")) joint.push_back(parse_number(x));
    return FiniteSystem(vars, joint);
}

/** {"labels": [...], "cov": [[...]]} */
inline GaussianSystem read_gaussian(const json& j)
{
    require(j.contains("cov"), ErrorKind::invalid_input, "gaussian system needs 'cov'");
    return make_gaussian(parse_matrix(j.at("cov"), "cov"), string_list(j, "labels"));
}

/** "(1,-2)" -> {1, -2} */
inline std::vector<int> parse_offset(std::string s)
{
    for (char& c : s)
        if (c == '(' || c == ')' || c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<int> z;
    int v = 0;
    while (in >> v) z.push_back(v);
    require(in.eof(), ErrorKind::invalid_input, "bad offset key");
    return z;
}

/** {"n":, "norm": "l1|linf|l2", "R":, "values": {"(z1,..,zn)": eps}, "tail": {...}} */
inline LatticeKernel read_lattice_kernel(const json& j)
{
    const int n = j.at("n").get<int>(), R = j.at("R").get<int>();
    require(n >= 1 && R >= 0, ErrorKind::invalid_input, "kernel needs n >= 1 and R >= 0");
    LatticeKernel k = LatticeKernel::zeros(n, R);
    std::string norm = j.value("norm", std::string("linf"));
    if (norm == "l1")
        k.norm = LatticeNorm::l1;
    else if (norm == "l2")
        k.norm = LatticeNorm::l2;
    else {
        require(norm == "linf", ErrorKind::invalid_input, "norm must be l1, l2 or linf");
        k.norm = LatticeNorm::linf;
    }
    for (const auto& [key, v] : j.at("values").items()) {
        auto z = parse_offset(key);
        require(int(z.size()) == n && k.in_window(z), ErrorKind::invalid_input, "offset " + key + " outside the window");
        k.at(z) = parse_number(v);
    }
    if (j.contains("tail")) {
        const auto& t = j.at("tail");
        std::string kind = t.value("kind", std::string("none"));
        if (kind == "exponential")
            k.tail.kind = TailModel::Kind::exponential;
        else if (kind == "polynomial")
            k.tail.kind = TailModel::Kind::polynomial;
        else
            require(kind == "none", ErrorKind::invalid_input, "tail kind must be none, exponential or polynomial");
        k.tail.C = t.contains("C") ? parse_number(t.at("C")) : 0.0;
        k.tail.rate = t.contains("rate") ? parse_number(t.at("rate")) : 0.0;
        k.complete = k.tail.kind == TailModel::Kind::none;
    }
    k.complete = j.value("complete", k.complete);
    validate(k);
    return k;
}

/** Same shape as a lattice kernel; "tail_l1" is the certified l1 mass outside the window. */
inline ToeplitzKernel read_toeplitz(const json& j)
{
    const int n = j.at("n").get<int>(), R = j.at("R").get<int>();
    require(n >= 1 && R >= 0, ErrorKind::invalid_input, "kernel needs n >= 1 and R >= 0");
    ToeplitzKernel k = ToeplitzKernel::zeros(n, R);
    for (const auto& [key, v] : j.at("values").items()) {
        auto z = parse_offset(key);
        require(int(z.size()) == n && k.in_window(z), ErrorKind::invalid_input, "offset " + key + " outside the window");
        k.ref(z) = parse_number(v);
    }
    k.tail_l1 = j.contains("tail_l1") ? parse_number(j.at("tail_l1")) : 0.0;
    validate(k);
    return k;
}

// ---------------------------------------------------------------------------
// Output

inline std::string number(double v)
{
    if (!std::isfinite(v)) return std::isnan(v) ? "null" : (v > 0 ? "1e999" : "-1e999");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/** JSON text with floats at 17 significant digits. */
inline void write_json(std::ostream& os, const json& j, int indent = 0)
{
    const std::string pad(std::size_t(indent + 2), ' '), end_pad(std::size_t(indent), ' ');
    if (j.is_object()) {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            if (!first) os << ",\n";
            first = false;
            os << pad << json(k).dump() << ": ";
            write_json(os, v, indent + 2);
        }
        os << "\n" << end_pad << "}";
    } else if (j.is_array()) {
        bool flat = std::all_of(j.begin(), j.end(), [](const json& x) { return x.is_primitive(); });
        if (j.empty() || flat) {
            os << "[";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ", ";
                write_json(os, j[i], indent);
            }
            os << "]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ",\n";
            os << pad;
            write_json(os, j[i], indent + 2);
        }
        os << "\n" << end_pad << "]";
    } else if (j.is_number_float()) {
        os << number(j.get<double>());
    } else {
        os << j.dump();
    }
}

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

/** Lattice kernel in the input shape, nonzero entries only. */
inline json to_json(const LatticeKernel& k)
{
    json values = json::object();
    for (std::size_t i = 0; i < k.values.size(); ++i) {
        if (k.values[i] == 0.0) continue;
        std::string key = "(";
        auto z = k.point(i);
        for (std::size_t c = 0; c < z.size(); ++c) key += (c ? "," : "") + std::to_string(z[c]);
        values[key + ")"] = k.values[i];
    }
    const char* norm = k.norm == LatticeNorm::l1 ? "l1" : (k.norm == LatticeNorm::l2 ? "l2" : "linf");
    return {{"n", k.n}, {"R", k.R}, {"norm", norm}, {"values", values}, {"complete", k.complete}};
}

/** Destination of a command's main output: stdout or a file. */
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            require(bool(file_), ErrorKind::invalid_input, "cannot write " + path);
        }
    }
    std::ostream& out() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

/** @brief CSV writer: '#' comment header, then a column row, then data at 17 digits. */
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const std::string& comment, const std::vector<std::string>& columns) : os_(os)
    {
        os_ << "# " << comment << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
        os_ << "\n";
    }
    template <typename... T>
    void row(const T&... v)
    {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(v), first = false), ...);
        os_ << "\n";
    }

private:
    static std::string cell(double v) { return number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    std::ostream& os_;
};

} // namespace rhomix::io
