#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "sose/apply.hpp"
#include "sose/error.hpp"
#include "sose/leverage.hpp"
#include "sose/sketch.hpp"

namespace sose {

// ---------------------------------------------------------------------------
// Matrix Market
// ---------------------------------------------------------------------------

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

/// Reads the next line that is neither blank nor a comment.
inline bool next_data_line(std::istream& in, std::string& line, std::size_t& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank(line) || line.front() == '%') continue;
        return true;
    }
    return false;
}

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

}  // namespace detail

/// Reads a real/integer/pattern general Matrix Market matrix. Coordinate
/// files yield sparse rows (duplicates summed); array files yield dense rows.
inline TallMatrix read_matrix_market(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty Matrix Market input", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
    object = detail::lower(object);
    format = detail::lower(format);
    field = detail::lower(field);
    symmetry = detail::lower(symmetry);
    if (object != "matrix") throw ParseError("unsupported object '" + object + "'", lineno);
    if (format != "coordinate" && format != "array") throw ParseError("unsupported format '" + format + "'", lineno);
    if (field != "real" && field != "integer" && field != "double" && !(field == "pattern" && format == "coordinate"))
        throw ParseError("unsupported field '" + field + "'", lineno);
    if (symmetry != "general") throw ParseError("unsupported symmetry '" + symmetry + "' (only general)", lineno);
    const bool pattern = field == "pattern";

    if (!detail::next_data_line(in, line, lineno)) throw ParseError("missing size line", lineno + 1);
    std::istringstream size_line(line);
    long long rows = -1, cols = -1, count = -1;
    size_line >> rows >> cols;
    if (format == "coordinate") size_line >> count;
    if (!size_line || rows < 0 || cols < 0 || (format == "coordinate" && count < 0))
        throw ParseError("malformed size line", lineno);
    std::string extra;
    if (size_line >> extra) throw ParseError("trailing text on size line", lineno);

    auto read_value = [&](std::istringstream& ss) {
        double v = 0.0;
        if (!(ss >> v)) throw ParseError("malformed numeric value", lineno);
        if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
        return v;
    };
    auto no_trailing = [&](std::istringstream& ss) {
        std::string rest;
        if (ss >> rest) throw ParseError("trailing text on entry line", lineno);
    };

    if (format == "array") {
        DenseRows a(rows, cols);
        for (long long k = 0; k < rows * cols; ++k) {
            if (!detail::next_data_line(in, line, lineno))
                throw ParseError("expected " + std::to_string(rows * cols) + " values, found " + std::to_string(k),
                                 lineno + 1);
            std::istringstream ss(line);
            a(k % rows, k / rows) = read_value(ss);
            no_trailing(ss);
        }
        if (detail::next_data_line(in, line, lineno)) throw ParseError("more values than the size line declares", lineno);
        return TallMatrix(std::move(a));
    }

    std::vector<Eigen::Triplet<double, std::int64_t>> trips;
    trips.reserve(static_cast<std::size_t>(count));
    for (long long k = 0; k < count; ++k) {
        if (!detail::next_data_line(in, line, lineno))
            throw ParseError("expected " + std::to_string(count) + " entries, found " + std::to_string(k), lineno + 1);
        std::istringstream ss(line);
        long long i = 0, j = 0;
        if (!(ss >> i >> j)) throw ParseError("malformed entry indices", lineno);
        if (i < 1 || i > rows || j < 1 || j > cols)
            throw ParseError("entry (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                                 std::to_string(rows) + " x " + std::to_string(cols),
                             lineno);
        const double v = pattern ? 1.0 : read_value(ss);
        no_trailing(ss);
        trips.emplace_back(i - 1, j - 1, v);
    }
    if (detail::next_data_line(in, line, lineno)) throw ParseError("more entries than the size line declares", lineno);
    SparseRows a(rows, cols);
    a.setFromTriplets(trips.begin(), trips.end());
    return TallMatrix(std::move(a));
}

/// Dense array format, column-major, 17 significant digits (lossless).
template <class Derived>
void write_matrix_market(std::ostream& out, const Eigen::MatrixBase<Derived>& a) {
    out << "%%MatrixMarket matrix array real general\n" << a.rows() << ' ' << a.cols() << '\n';
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) out << detail::format_double(a(i, j)) << '\n';
    if (!out) throw IoError("failed writing Matrix Market output");
}

/// Coordinate format with 1-based indices, row by row.
inline void write_matrix_market(std::ostream& out, const SparseRows& a) {
    out << "%%MatrixMarket matrix coordinate real general\n"
        << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
    for (Eigen::Index i = 0; i < a.outerSize(); ++i)
        for (SparseRows::InnerIterator it(a, i); it; ++it)
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << detail::format_double(it.value()) << '\n';
    if (!out) throw IoError("failed writing Matrix Market output");
}

inline void write_matrix_market(std::ostream& out, const TallMatrix& a) {
    if (a.is_sparse())
        write_matrix_market(out, a.sparse());
    else
        write_matrix_market(out, a.dense());
}

inline std::ifstream open_input(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline TallMatrix read_matrix_market_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return read_matrix_market(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

template <class M>
void write_matrix_market_file(const std::string& path, const M& a) {
    auto out = open_output(path);
    write_matrix_market(out, a);
}

// ---------------------------------------------------------------------------
// Sketch files
//
//   bytes 0-7    magic "SKETCH01"
//   bytes 8-15   header length H, uint64 little-endian
//   next H bytes UTF-8 JSON header:
//                  format_version, kind, storage ("csc" | "dense"), m, n, p,
//                  degree_k, seed, scale, nnz, and for leverage-adapted
//                  kinds beta1, beta2, scores_digest (16 hex digits)
//   csc:   col_ptr (n+1 x uint64), row indices (nnz x uint32, 0-based),
//          unscaled values (nnz x float64), all little-endian
//   dense: unscaled values (m*n x float64), column-major
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kSketchMagic{'S', 'K', 'E', 'T', 'C', 'H', '0', '1'};
inline constexpr int kSketchFormatVersion = 1;

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b.data(), 4);
}

inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    put_u64(out, bits);
}

inline std::uint64_t get_u64(std::istream& in) {
    std::array<unsigned char, 8> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw ParseError("truncated sketch file", 0);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw ParseError("truncated sketch file", 0);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

inline std::string hex64(std::uint64_t v) {
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
    return buf.data();
}

inline nlohmann::json spec_header(const SketchSpec& spec, double scale, std::int64_t nnz, bool dense) {
    nlohmann::json h;
    h["format_version"] = kSketchFormatVersion;
    h["kind"] = std::string(to_string(spec.kind));
    h["storage"] = dense ? "dense" : "csc";
    h["m"] = spec.m;
    h["n"] = spec.n;
    h["p"] = spec.p;
    h["degree_k"] = spec.degree_k;
    h["seed"] = spec.seed;
    h["scale"] = scale;
    h["nnz"] = nnz;
    return h;
}

inline void write_header(std::ostream& out, const nlohmann::json& h) {
    const std::string text = h.dump();
    out.write(kSketchMagic.data(), kSketchMagic.size());
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace detail

inline void write_sketch(std::ostream& out, const SparseSketch& sk) {
    nlohmann::json h = detail::spec_header(sk.spec, sk.scale, sk.nnz(), false);
    if (sk.less) {
        h["beta1"] = sk.less->beta1;
        h["beta2"] = sk.less->beta2;
        h["scores_digest"] = detail::hex64(sk.less->scores_digest);
    }
    detail::write_header(out, h);
    for (auto v : sk.col_ptr) detail::put_u64(out, static_cast<std::uint64_t>(v));
    for (auto r : sk.row_idx) detail::put_u32(out, static_cast<std::uint32_t>(r));
    for (double v : sk.values) detail::put_f64(out, v);
    if (!out) throw IoError("failed writing sketch");
}

inline void write_sketch(std::ostream& out, const DenseSketch& sk) {
    detail::write_header(out, detail::spec_header(sk.spec, sk.scale, sk.rows() * sk.cols(), true));
    for (Eigen::Index j = 0; j < sk.unscaled.cols(); ++j)
        for (Eigen::Index i = 0; i < sk.unscaled.rows(); ++i) detail::put_f64(out, sk.unscaled(i, j));
    if (!out) throw IoError("failed writing sketch");
}

inline void write_sketch(std::ostream& out, const AnySketch& sk) {
    std::visit([&](const auto& s) { write_sketch(out, s); }, sk);
}

inline AnySketch read_sketch(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kSketchMagic) throw ParseError("not a sketch file", 0);
    const std::uint64_t len = detail::get_u64(in);
    if (len > (std::uint64_t{1} << 24)) throw ParseError("implausible sketch header length", 0);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError("truncated sketch header", 0);

    nlohmann::json h;
    SketchSpec spec;
    double scale = 1.0;
    std::int64_t nnz = 0;
    std::string storage;
    try {
        h = nlohmann::json::parse(text);
        if (h.at("format_version").get<int>() != kSketchFormatVersion)
            throw ParseError("unsupported sketch format version", 0);
        spec.kind = parse_sketch_kind(h.at("kind").get<std::string>());
        spec.m = h.at("m").get<std::int64_t>();
        spec.n = h.at("n").get<std::int64_t>();
        spec.p = h.at("p").get<double>();
        spec.degree_k = h.at("degree_k").get<int>();
        spec.seed = h.at("seed").get<std::uint64_t>();
        scale = h.at("scale").get<double>();
        nnz = h.at("nnz").get<std::int64_t>();
        storage = h.at("storage").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad sketch header: ") + e.what(), 0);
    } catch (const ParameterError& e) {
        throw ParseError(std::string("bad sketch header: ") + e.what(), 0);
    }
    if (spec.m < 1 || spec.n < 1 || nnz < 0) throw ParseError("bad sketch dimensions", 0);

    if (storage == "dense") {
        if (nnz != spec.m * spec.n) throw ParseError("dense sketch entry count mismatch", 0);
        DenseSketch sk{spec, Eigen::MatrixXd(spec.m, spec.n), scale};
        for (std::int64_t j = 0; j < spec.n; ++j)
            for (std::int64_t i = 0; i < spec.m; ++i) sk.unscaled(i, j) = detail::get_f64(in);
        return sk;
    }
    if (storage != "csc") throw ParseError("unknown sketch storage '" + storage + "'", 0);
    SparseSketch sk;
    sk.spec = spec;
    sk.scale = scale;
    sk.col_ptr.resize(static_cast<std::size_t>(spec.n) + 1);
    for (auto& v : sk.col_ptr) v = static_cast<std::int64_t>(detail::get_u64(in));
    sk.row_idx.resize(static_cast<std::size_t>(nnz));
    for (auto& r : sk.row_idx) r = static_cast<std::int32_t>(detail::get_u32(in));
    sk.values.resize(static_cast<std::size_t>(nnz));
    for (auto& v : sk.values) v = detail::get_f64(in);
    if (h.contains("beta1")) {
        LessMetadata meta;
        meta.beta1 = h["beta1"].get<double>();
        meta.beta2 = h["beta2"].get<double>();
        meta.scores_digest = std::stoull(h["scores_digest"].get<std::string>(), nullptr, 16);
        sk.less = meta;
    }
    try {
        sk.check_structure();
    } catch (const ParameterError& e) {
        throw ParseError(std::string("corrupt sketch: ") + e.what(), 0);
    }
    return sk;
}

inline void write_sketch_file(const std::string& path, const AnySketch& sk) {
    auto out = open_output(path, std::ios::out | std::ios::binary);
    write_sketch(out, sk);
}

inline AnySketch read_sketch_file(const std::string& path) {
    auto in = open_input(path, std::ios::in | std::ios::binary);
    try {
        return read_sketch(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

// ---------------------------------------------------------------------------
// Leverage score files: {"beta1": b1, "beta2": b2, "scores": [z_1, ...]}
// ---------------------------------------------------------------------------

inline nlohmann::json scores_to_json(const LeverageScores& s) {
    nlohmann::json j;
    j["beta1"] = s.beta1;
    j["beta2"] = s.beta2;
    j["scores"] = std::vector<double>(s.z.data(), s.z.data() + s.z.size());
    return j;
}

inline LeverageScores scores_from_json(const nlohmann::json& j) {
    LeverageScores s;
    try {
        s.beta1 = j.at("beta1").get<double>();
        s.beta2 = j.at("beta2").get<double>();
        const auto z = j.at("scores").get<std::vector<double>>();
        s.z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad leverage score file: ") + e.what(), 0);
    }
    if (s.beta1 < 1.0 || s.beta2 < 1.0) throw ParseError("beta1 and beta2 must be at least 1", 0);
    if ((s.z.array() < 0.0).any() || (s.z.array() > 1.0).any())
        throw ParseError("leverage scores must lie in [0, 1]", 0);
    return s;
}

/// Parses a JSON document, reporting syntax errors with their line.
inline nlohmann::json parse_json(std::istream& in) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_json(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline LeverageScores read_scores_file(const std::string& path) { return scores_from_json(read_json_file(path)); }

inline void write_scores_file(const std::string& path, const LeverageScores& s) {
    write_json_file(path, scores_to_json(s));
}

}  // namespace sose
