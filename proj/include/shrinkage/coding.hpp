#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace shrinkage {

/// Untyped table as read from CSV: column names and string cells, column-major.
struct RawTable {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> cells;

    std::size_t rows() const { return cells.empty() ? 0 : cells.front().size(); }

    const std::vector<std::string>& column(const std::string& name) const
    {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw DataError("no column named '" + name + "'");
        return cells[static_cast<std::size_t>(it - names.begin())];
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_double(const std::string& s, double& out)
{
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline bool is_missing(const std::string& s)
{
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".";
}

}  // namespace detail

inline RawTable read_csv(std::istream& in)
{
    RawTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV input");
    t.names = detail::split_csv_line(line);
    t.cells.resize(t.names.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != t.names.size()) {
            throw DataError("CSV line " + std::to_string(lineno) + " has " + std::to_string(fields.size())
                            + " fields, header has " + std::to_string(t.names.size()));
        }
        for (std::size_t j = 0; j < fields.size(); ++j) t.cells[j].push_back(std::move(fields[j]));
    }
    return t;
}

inline RawTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

/// Rows without missing cells in any of `columns` (all columns when empty).
inline RawTable complete_cases(const RawTable& raw, const std::vector<std::string>& columns = {})
{
    std::vector<std::size_t> idx;
    if (columns.empty()) {
        for (std::size_t j = 0; j < raw.names.size(); ++j) idx.push_back(j);
    } else {
        for (const auto& c : columns) {
            auto it = std::find(raw.names.begin(), raw.names.end(), c);
            if (it == raw.names.end()) throw DataError("no column named '" + c + "'");
            idx.push_back(static_cast<std::size_t>(it - raw.names.begin()));
        }
    }
    RawTable out;
    out.names = raw.names;
    out.cells.resize(raw.names.size());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        bool ok = true;
        for (auto j : idx) ok = ok && !detail::is_missing(raw.cells[j][i]);
        if (!ok) continue;
        for (std::size_t j = 0; j < raw.names.size(); ++j) out.cells[j].push_back(raw.cells[j][i]);
    }
    return out;
}

/// Declared kind of a raw column.
enum class RawKind { continuous, binary, nominal, noise, raw };

struct ColumnSpec {
    RawKind kind = RawKind::continuous;
    std::string baseline;  // binary/nominal: level mapped to -1 / dropped
};

struct CodingPolicy {
    std::string response;
    std::vector<std::pair<std::string, ColumnSpec>> covariates;  // in output order
    bool standardize_binary = false;  // complete standardization instead of -1/+1
};

/**
 * Coding parameters fitted on a training table. transform() applies the same
 * parameters to any table with the same columns (e.g. a test set).
 */
class Coder {
public:
    struct Column {
        std::string name;
        RawKind kind = RawKind::continuous;
        double center = 0.0;
        double scale = 1.0;
        std::vector<std::string> levels;  // binary: {minus, plus}; nominal: all, baseline first
    };

    static Coder fit(const RawTable& raw, const CodingPolicy& policy)
    {
        Coder c;
        c.policy_ = policy;
        for (const auto& [name, spec] : policy.covariates) {
            const auto& cells = raw.column(name);
            Column col;
            col.name = name;
            col.kind = spec.kind;
            switch (spec.kind) {
                case RawKind::continuous:
                case RawKind::noise: {
                    auto v = numeric(cells, name);
                    const double n = static_cast<double>(v.size());
                    double mean = 0.0;
                    for (double x : v) mean += x;
                    mean /= n;
                    double ss = 0.0;
                    for (double x : v) ss += (x - mean) * (x - mean);
                    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
                    if (!(sd > 0.0) || sd < 1e-12 * std::max(1.0, std::abs(mean))) {
                        throw DataError("column '" + name + "' is constant");
                    }
                    col.center = mean;
                    col.scale = sd;
                    break;
                }
                case RawKind::binary: {
                    auto levels = sorted_levels(cells, name);
                    if (levels.size() != 2) {
                        throw DataError("binary column '" + name + "' has " + std::to_string(levels.size())
                                        + " observed levels");
                    }
                    if (!spec.baseline.empty()) {
                        if (std::find(levels.begin(), levels.end(), spec.baseline) == levels.end()) {
                            throw DataError("baseline '" + spec.baseline + "' not observed in '" + name + "'");
                        }
                        if (levels[1] == spec.baseline) std::swap(levels[0], levels[1]);
                    }
                    col.levels = levels;
                    if (policy.standardize_binary) {
                        double mean = 0.0;
                        for (const auto& s : cells) mean += (s == levels[1]) ? 1.0 : 0.0;
                        const double n = static_cast<double>(cells.size());
                        mean /= n;
                        const double sd = std::sqrt(mean * (1.0 - mean) * n / (n - 1.0));
                        col.center = mean;
                        col.scale = sd;
                    }
                    break;
                }
                case RawKind::nominal: {
                    auto levels = sorted_levels(cells, name);
                    if (levels.size() < 2) throw DataError("nominal column '" + name + "' has one level");
                    std::string base = spec.baseline.empty() ? levels.front() : spec.baseline;
                    auto it = std::find(levels.begin(), levels.end(), base);
                    if (it == levels.end()) {
                        throw DataError("baseline '" + base + "' not observed in '" + name + "'");
                    }
                    levels.erase(it);
                    levels.insert(levels.begin(), base);
                    col.levels = levels;
                    break;
                }
                case RawKind::raw: {
                    numeric(cells, name);
                    break;
                }
            }
            c.columns_.push_back(std::move(col));
        }
        return c;
    }

    Dataset transform(const RawTable& raw) const
    {
        const std::size_t n = raw.rows();
        std::vector<VectorXd> cols;
        std::vector<ColumnMeta> meta;
        for (const auto& col : columns_) {
            const auto& cells = raw.column(col.name);
            switch (col.kind) {
                case RawKind::continuous:
                case RawKind::noise: {
                    auto v = numeric(cells, col.name);
                    VectorXd x(static_cast<Index>(n));
                    for (std::size_t i = 0; i < n; ++i) x(static_cast<Index>(i)) = (v[i] - col.center) / col.scale;
                    cols.push_back(std::move(x));
                    meta.push_back({col.kind == RawKind::noise ? ColumnKind::noise : ColumnKind::continuous,
                                    ColumnCoding::standardized, col.name});
                    break;
                }
                case RawKind::binary: {
                    VectorXd x(static_cast<Index>(n));
                    for (std::size_t i = 0; i < n; ++i) {
                        const auto& s = cells[i];
                        double b;
                        if (s == col.levels[0]) b = 0.0;
                        else if (s == col.levels[1]) b = 1.0;
                        else throw DataError("unseen level '" + s + "' in column '" + col.name + "'");
                        x(static_cast<Index>(i)) = policy_.standardize_binary ? (b - col.center) / col.scale
                                                                              : 2.0 * b - 1.0;
                    }
                    cols.push_back(std::move(x));
                    meta.push_back({ColumnKind::binary,
                                    policy_.standardize_binary ? ColumnCoding::standardized
                                                               : ColumnCoding::plus_minus_one,
                                    col.name});
                    break;
                }
                case RawKind::nominal: {
                    for (std::size_t i = 0; i < n; ++i) {
                        if (std::find(col.levels.begin(), col.levels.end(), cells[i]) == col.levels.end()) {
                            throw DataError("unseen level '" + cells[i] + "' in column '" + col.name + "'");
                        }
                    }
                    for (std::size_t l = 1; l < col.levels.size(); ++l) {
                        VectorXd x(static_cast<Index>(n));
                        for (std::size_t i = 0; i < n; ++i) {
                            x(static_cast<Index>(i)) = cells[i] == col.levels[l] ? 1.0 : -1.0;
                        }
                        cols.push_back(std::move(x));
                        meta.push_back({ColumnKind::dummy, ColumnCoding::plus_minus_one,
                                        col.name + "=" + col.levels[l]});
                    }
                    break;
                }
                case RawKind::raw: {
                    auto v = numeric(cells, col.name);
                    cols.push_back(Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size())));
                    meta.push_back({ColumnKind::continuous, ColumnCoding::raw, col.name});
                    break;
                }
            }
        }
        MatrixXd X(static_cast<Index>(n), static_cast<Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Index>(j)) = cols[j];
        auto yv = numeric(raw.column(policy_.response), policy_.response);
        VectorXd y = Eigen::Map<const VectorXd>(yv.data(), static_cast<Index>(yv.size()));
        return Dataset(std::move(y), std::move(X), std::move(meta), policy_.response);
    }

    const std::vector<Column>& columns() const { return columns_; }

private:
    static std::vector<double> numeric(const std::vector<std::string>& cells, const std::string& name)
    {
        std::vector<double> v(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (detail::is_missing(cells[i])) {
                throw DataError("missing value in column '" + name + "' row " + std::to_string(i + 1));
            }
            if (!detail::parse_double(cells[i], v[i]) || !std::isfinite(v[i])) {
                throw DataError("non-numeric value '" + cells[i] + "' in column '" + name + "'");
            }
        }
        return v;
    }

    // Numeric levels sort numerically, others lexicographically.
    static std::vector<std::string> sorted_levels(const std::vector<std::string>& cells, const std::string& name)
    {
        std::vector<std::string> levels;
        for (const auto& s : cells) {
            if (detail::is_missing(s)) throw DataError("missing value in column '" + name + "'");
            if (std::find(levels.begin(), levels.end(), s) == levels.end()) levels.push_back(s);
        }
        bool all_numeric = true;
        for (const auto& s : levels) {
            double d;
            all_numeric = all_numeric && detail::parse_double(s, d);
        }
        std::sort(levels.begin(), levels.end(), [&](const std::string& a, const std::string& b) {
            if (all_numeric) {
                double da = 0, db = 0;
                detail::parse_double(a, da);
                detail::parse_double(b, db);
                return da < db;
            }
            return a < b;
        });
        return levels;
    }

    CodingPolicy policy_;
    std::vector<Column> columns_;
};

inline Dataset code_dataset(const RawTable& raw, const CodingPolicy& policy)
{
    return Coder::fit(raw, policy).transform(raw);
}

/// Appends `count` i.i.d. N(0,1) columns, uncoded, kind=noise.
inline Dataset add_noise_covariates(const Dataset& d, int count, std::uint64_t seed)
{
    if (count < 0) throw Error("noise covariate count must be >= 0");
    if (count == 0) return d;
    Rng rng(child_seed(seed, stream::noise));
    MatrixXd X(d.n(), d.p() + count);
    X.leftCols(d.p()) = d.X();
    for (Index j = d.p(); j < X.cols(); ++j) {
        for (Index i = 0; i < d.n(); ++i) X(i, j) = rng.normal();
    }
    auto meta = d.columns();
    for (int k = 0; k < count; ++k) {
        meta.push_back({ColumnKind::noise, ColumnCoding::raw, "noise" + std::to_string(k + 1)});
    }
    return Dataset(d.y(), std::move(X), std::move(meta), d.name());
}

}  // namespace shrinkage
