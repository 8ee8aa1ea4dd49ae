#include "esl/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esl/error.hpp"

namespace esl {

int cutoff_integer(const Eigen::VectorXd& e) {
    double s = 0.0;
    int J = 0;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        s += e[j];
        if (e[j] - (s - 1.0) / static_cast<double>(j + 1) > 0.0) J = static_cast<int>(j + 1);
    }
    return J;
}

SimplexProjection project_simplex(const Eigen::VectorXd& e) {
    const Eigen::Index n = e.size();
    if (n < 1) throw EslError(ErrorCode::InvalidArgument, "empty vector");
    if (!e.allFinite()) throw EslError(ErrorCode::NonFinite, "simplex input");

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return e[a] > e[b]; });

    Eigen::VectorXd sorted(n);
    for (Eigen::Index i = 0; i < n; ++i) sorted[i] = e[order[static_cast<size_t>(i)]];
    const int J = std::max(1, cutoff_integer(sorted));
    const double theta = (sorted.head(J).sum() - 1.0) / J;

    SimplexProjection out;
    out.weights = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = e[i] - theta;
        if (v >= kSimplexZeroClamp) out.weights[i] = v;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (out.weights[i] > 0.0) out.support.push_back(static_cast<int>(i));
    out.cutoff = static_cast<int>(out.support.size());
    return out;
}

}  // namespace esl
