#include "gve/linalg.hpp"

#include "gve/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gve::linalg {

double condition_number(const Matrix& a) {
    if (a.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const Vector& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (!(smax > 0.0)) return std::numeric_limits<double>::infinity();
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

Matrix solve(const Matrix& a, const Matrix& b, std::string_view what) {
    const double cond = condition_number(a);
    if (!(cond <= kConditionLimit)) {
        throw RankError(std::string(what) + " is singular or ill-conditioned", cond);
    }
    return a.colPivHouseholderQr().solve(b);
}

Matrix least_squares(const Matrix& a, const Matrix& b, std::string_view what) {
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    if (qr.rank() < a.cols()) {
        throw RankError(std::string(what) + " is column-rank deficient", condition_number(a));
    }
    return qr.solve(b);
}

void symmetrize(Matrix& a) {
    Matrix t = 0.5 * (a + a.transpose());
    a = std::move(t);
}

}  // namespace gve::linalg
