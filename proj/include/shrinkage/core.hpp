#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace shrinkage {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

enum class ColumnKind { continuous, binary, dummy, noise };
enum class ColumnCoding { standardized, plus_minus_one, raw };

inline const char* to_string(ColumnKind k)
{
    switch (k) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::binary: return "binary";
        case ColumnKind::dummy: return "dummy";
        case ColumnKind::noise: return "noise";
    }
    return "?";
}

struct ColumnMeta {
    ColumnKind kind = ColumnKind::continuous;
    ColumnCoding coding = ColumnCoding::raw;
    std::string original_name;
};

/// Response vector plus coded covariate matrix. Complete-case only.
class Dataset {
public:
    Dataset() = default;

    Dataset(VectorXd y, MatrixXd X, std::vector<ColumnMeta> columns = {}, std::string name = {})
        : y_(std::move(y)), X_(std::move(X)), columns_(std::move(columns)), name_(std::move(name))
    {
        if (columns_.empty()) {
            columns_.resize(static_cast<std::size_t>(X_.cols()));
            for (Index j = 0; j < X_.cols(); ++j) {
                columns_[static_cast<std::size_t>(j)].original_name = "x" + std::to_string(j + 1);
            }
        }
        if (X_.rows() < 1 || X_.cols() < 1) {
            throw DataError("dataset needs n >= 1 and p >= 1");
        }
        if (y_.size() != X_.rows()) {
            throw DimensionError("response length " + std::to_string(y_.size()) + " != rows "
                                 + std::to_string(X_.rows()));
        }
        if (static_cast<Index>(columns_.size()) != X_.cols()) {
            throw DimensionError("column metadata count does not match X");
        }
        if (!X_.allFinite() || !y_.allFinite()) {
            throw DataError("dataset contains non-finite values");
        }
    }

    const VectorXd& y() const { return y_; }
    const MatrixXd& X() const { return X_; }
    const std::vector<ColumnMeta>& columns() const { return columns_; }
    const std::string& name() const { return name_; }
    Index n() const { return X_.rows(); }
    Index p() const { return X_.cols(); }

    Dataset with_response(VectorXd y) const { return Dataset(std::move(y), X_, columns_, name_); }

    Dataset rows(const std::vector<std::size_t>& idx) const
    {
        VectorXd y(static_cast<Index>(idx.size()));
        MatrixXd X(static_cast<Index>(idx.size()), X_.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto r = static_cast<Index>(idx[i]);
            y(static_cast<Index>(i)) = y_(r);
            X.row(static_cast<Index>(i)) = X_.row(r);
        }
        return Dataset(std::move(y), std::move(X), columns_, name_);
    }

private:
    VectorXd y_;
    MatrixXd X_;
    std::vector<ColumnMeta> columns_;
    std::string name_;
};

/// How a penalty group's lambda is obtained.
struct GroupMode {
    enum class Kind { estimated, unpenalized, fixed };
    Kind kind = Kind::estimated;
    double value = 0.0;  // lambda, fixed mode only

    static GroupMode estimated() { return {Kind::estimated, 0.0}; }
    static GroupMode unpenalized() { return {Kind::unpenalized, 0.0}; }
    static GroupMode fixed(double lambda)
    {
        if (!(lambda >= 0.0)) throw Error("fixed penalty must be >= 0");
        return {Kind::fixed, lambda};
    }

    bool operator==(const GroupMode&) const = default;
};

/// Map from coefficient index to penalty group (0-based) plus a mode per group.
class PenaltyStructure {
public:
    PenaltyStructure() = default;

    PenaltyStructure(std::vector<int> group_of, std::vector<GroupMode> modes)
        : group_of_(std::move(group_of)), modes_(std::move(modes))
    {
        if (group_of_.empty()) throw Error("penalty structure needs p >= 1");
        const int G = static_cast<int>(modes_.size());
        if (G < 1 || G > static_cast<int>(group_of_.size())) {
            throw Error("penalty structure needs 1 <= G <= p");
        }
        std::vector<int> count(static_cast<std::size_t>(G), 0);
        for (std::size_t k = 0; k < group_of_.size(); ++k) {
            const int g = group_of_[k];
            if (g < 0 || g >= G) {
                throw Error("coefficient " + std::to_string(k + 1) + " mapped to group "
                            + std::to_string(g + 1) + " outside 1.." + std::to_string(G));
            }
            ++count[static_cast<std::size_t>(g)];
        }
        for (int g = 0; g < G; ++g) {
            if (count[static_cast<std::size_t>(g)] == 0) {
                throw Error("penalty group " + std::to_string(g + 1) + " is empty");
            }
        }
    }

    static PenaltyStructure global(Index p, GroupMode mode = GroupMode::estimated())
    {
        return {std::vector<int>(static_cast<std::size_t>(p), 0), {mode}};
    }

    static PenaltyStructure local(Index p, GroupMode mode = GroupMode::estimated())
    {
        std::vector<int> g(static_cast<std::size_t>(p));
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = static_cast<int>(k);
        return {std::move(g), std::vector<GroupMode>(static_cast<std::size_t>(p), mode)};
    }

    /// Groups given as 1-based labels, as in config files.
    static PenaltyStructure from_labels(const std::vector<int>& labels, std::vector<GroupMode> modes)
    {
        std::vector<int> g(labels.size());
        for (std::size_t k = 0; k < labels.size(); ++k) g[k] = labels[k] - 1;
        return {std::move(g), std::move(modes)};
    }

    Index p() const { return static_cast<Index>(group_of_.size()); }
    int groups() const { return static_cast<int>(modes_.size()); }
    int group_of(Index k) const { return group_of_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& group_map() const { return group_of_; }
    const GroupMode& mode(int g) const { return modes_[static_cast<std::size_t>(g)]; }
    const std::vector<GroupMode>& modes() const { return modes_; }

    int group_size(int g) const
    {
        int m = 0;
        for (int k : group_of_) m += (k == g);
        return m;
    }

    std::vector<int> estimated_groups() const
    {
        std::vector<int> out;
        for (int g = 0; g < groups(); ++g) {
            if (modes_[static_cast<std::size_t>(g)].kind == GroupMode::Kind::estimated) out.push_back(g);
        }
        return out;
    }

private:
    std::vector<int> group_of_;
    std::vector<GroupMode> modes_;
};

/**
 * Estimated linear model. `covariance` is the (p+1)x(p+1) covariance of
 * (intercept, beta); cov_beta() is its beta block.
 */
struct FitResult {
    double intercept = 0.0;
    VectorXd beta;
    double sigma2 = 1.0;
    VectorXd lambda;
    MatrixXd covariance;
    std::optional<MatrixXd> covariance_corrected;
    std::string method_tag;
    std::vector<std::string> warnings;

    Index p() const { return beta.size(); }
    MatrixXd cov_beta() const { return covariance.bottomRightCorner(p(), p()); }
    std::optional<MatrixXd> cov_beta_corrected() const
    {
        if (!covariance_corrected) return std::nullopt;
        return MatrixXd(covariance_corrected->bottomRightCorner(p(), p()));
    }
};

/// Point predictions of the linear predictor with interval bounds.
struct PredictionSet {
    VectorXd eta_hat;
    VectorXd lower;
    VectorXd upper;
    double level = 0.95;

    Index size() const { return eta_hat.size(); }
};

inline void require_columns(const MatrixXd& X, Index p)
{
    if (X.cols() != p) {
        throw DimensionError("matrix has " + std::to_string(X.cols()) + " columns, model has "
                             + std::to_string(p));
    }
}

inline VectorXd linear_predictor(double intercept, const VectorXd& beta, const MatrixXd& X)
{
    require_columns(X, beta.size());
    VectorXd eta = X * beta;
    eta.array() += intercept;
    return eta;
}

inline VectorXd linear_predictor(const FitResult& fit, const MatrixXd& X)
{
    return linear_predictor(fit.intercept, fit.beta, X);
}

/// [1, X]
inline MatrixXd with_intercept(const MatrixXd& X)
{
    MatrixXd W(X.rows(), X.cols() + 1);
    W.col(0).setOnes();
    W.rightCols(X.cols()) = X;
    return W;
}

}  // namespace shrinkage
