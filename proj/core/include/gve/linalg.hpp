#pragma once

#include "gve/panel.hpp"

#include <string_view>

namespace gve::linalg {

/// Matrices whose 2-norm condition number exceeds this are treated as singular.
inline constexpr double kConditionLimit = 1e10;

/// Ratio of largest to smallest singular value; +inf for exactly singular input.
double condition_number(const Matrix& a);

/// Solves a x = b for square a via column-pivoted QR. Throws RankError naming
/// `what` when cond(a) exceeds kConditionLimit.
Matrix solve(const Matrix& a, const Matrix& b, std::string_view what);

/// Least-squares coefficients of b on a (tall a) via column-pivoted QR.
/// Throws RankError when a is column-rank deficient.
Matrix least_squares(const Matrix& a, const Matrix& b, std::string_view what);

/// Symmetrizes in place: a <- (a + a') / 2.
void symmetrize(Matrix& a);

}  // namespace gve::linalg
