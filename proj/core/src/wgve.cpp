#include "gve/wgve.hpp"

#include "gve/errors.hpp"
#include "gve/linalg.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

namespace gve {

namespace {

using boost::multiprecision::cpp_int;

cpp_int binomial_big(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    cpp_int out = 1;
    for (std::uint64_t t = 1; t <= k; ++t) {
        out *= n - k + t;
        out /= t;
    }
    return out;
}

constexpr double kWeightSumTolerance = 1e-8;

// The rank-th (0-based) k-subset of pool in lexicographic order.
IndexSet unrank(const IndexSet& pool, int k, std::uint64_t rank) {
    IndexSet out;
    out.reserve(static_cast<std::size_t>(k));
    const int n = static_cast<int>(pool.size());
    int start = 0;
    for (int pos = 0; pos < k; ++pos) {
        for (int c = start; c < n; ++c) {
            const std::uint64_t below = binomial_count(static_cast<std::uint64_t>(n - c - 1),
                                                       static_cast<std::uint64_t>(k - pos - 1));
            if (rank < below) {
                out.push_back(pool[static_cast<std::size_t>(c)]);
                start = c + 1;
                break;
            }
            rank -= below;
        }
    }
    return out;
}

IndexSet complement(const IndexSet& pool, const IndexSet& taken) {
    IndexSet out;
    std::set_difference(pool.begin(), pool.end(), taken.begin(), taken.end(), std::back_inserter(out));
    return out;
}

}  // namespace

std::uint64_t binomial_count(std::uint64_t n, std::uint64_t k) {
    const cpp_int v = binomial_big(n, k);
    if (v > std::numeric_limits<std::uint64_t>::max()) {
        throw CapacityError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                            ") does not fit in 64 bits");
    }
    return static_cast<std::uint64_t>(v);
}

NormalizationSet enumerate_partitions(int j_total, const IndexSet& a0_in, int m_aj, int r,
                                      std::optional<std::uint64_t> cap, PartitionOrder order,
                                      std::uint64_t seed) {
    if (r < 1) throw SizeError("number of factors r must be at least 1");
    if (m_aj < r || m_aj % r != 0) throw SizeError("m_AJ must be a positive multiple of r");
    if (cap && *cap == 0) throw ValidationError("partition cap must be positive");

    IndexSet a0 = a0_in;
    std::sort(a0.begin(), a0.end());
    if (a0.empty()) throw SizeError("A0 is empty");
    if (std::adjacent_find(a0.begin(), a0.end()) != a0.end()) throw OverlapError("A0 contains a repeated group");
    for (int g : a0) {
        if (g < 0 || g >= j_total) throw ValidationError("A0 index outside the group range");
    }
    IndexSet all(static_cast<std::size_t>(j_total));
    for (int j = 0; j < j_total; ++j) all[static_cast<std::size_t>(j)] = j;
    const IndexSet pool = complement(all, a0);
    const int n_pool = static_cast<int>(pool.size());
    if (n_pool - m_aj < r) {
        throw SizeError("no partition leaves m_BJ >= r: J - m_A0 - m_AJ = " + std::to_string(n_pool - m_aj));
    }

    NormalizationSet out;
    const cpp_int total = binomial_big(static_cast<std::uint64_t>(n_pool), static_cast<std::uint64_t>(m_aj));
    if (total <= std::numeric_limits<std::uint64_t>::max()) out.q_total = static_cast<std::uint64_t>(total);
    if (!out.q_total && !cap) {
        throw CapacityError("Q_J = binomial(" + std::to_string(n_pool) + ", " + std::to_string(m_aj) +
                            ") exceeds 64 bits and no cap was given");
    }
    const std::uint64_t want = out.q_total ? (cap ? std::min(*cap, *out.q_total) : *out.q_total) : *cap;

    auto push = [&](const IndexSet& aj) {
        out.partitions.push_back(make_partition(j_total, r, a0, aj, complement(pool, aj)));
    };

    if (order == PartitionOrder::Random && out.q_total && want < *out.q_total) {
        // Floyd's algorithm: `want` distinct ranks from [0, q_total).
        std::mt19937_64 gen(seed);
        std::set<std::uint64_t> ranks;
        const std::uint64_t q = *out.q_total;
        for (std::uint64_t t = q - want; t < q; ++t) {
            std::uniform_int_distribution<std::uint64_t> dist(0, t);
            const std::uint64_t v = dist(gen);
            if (!ranks.insert(v).second) ranks.insert(t);
        }
        for (std::uint64_t rank : ranks) push(unrank(pool, m_aj, rank));
    } else {
        std::vector<int> idx(static_cast<std::size_t>(m_aj));
        for (int c = 0; c < m_aj; ++c) idx[static_cast<std::size_t>(c)] = c;
        for (std::uint64_t made = 0; made < want; ++made) {
            IndexSet aj(static_cast<std::size_t>(m_aj));
            for (int c = 0; c < m_aj; ++c) aj[static_cast<std::size_t>(c)] = pool[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])];
            push(aj);
            int pos = m_aj - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n_pool - m_aj + pos) --pos;
            if (pos < 0) break;
            ++idx[static_cast<std::size_t>(pos)];
            for (int c = pos + 1; c < m_aj; ++c) idx[static_cast<std::size_t>(c)] = idx[static_cast<std::size_t>(c - 1)] + 1;
        }
    }
    out.q_used = out.partitions.size();
    return out;
}

std::uint64_t truncation_q_star(int j_total, int m_a0, int r, std::uint64_t c) {
    if (c < 1) throw ValidationError("truncation constant C must be at least 1");
    if (r < 1) throw SizeError("number of factors r must be at least 1");
    const int n_pool = j_total - m_a0;
    if (n_pool < r) throw SizeError("fewer free groups than factors");
    const cpp_int q = binomial_big(static_cast<std::uint64_t>(n_pool), static_cast<std::uint64_t>(r));
    cpp_int fact = 1;
    cpp_int power = 1;
    for (int t = 1; t <= r; ++t) {
        fact *= t;
        power *= n_pool;
    }
    const cpp_int num = cpp_int(c) * fact * q;
    cpp_int star = (num + power - 1) / power;
    if (star < 1) star = 1;
    if (star > q) star = q;
    if (star > std::numeric_limits<std::uint64_t>::max()) {
        throw CapacityError("Q_J* does not fit in 64 bits");
    }
    return static_cast<std::uint64_t>(star);
}

GveFit estimate_theta_residual(const ResidualPanel& residuals, const PartitionScheme& scheme) {
    const PanelData panel = residuals.as_panel();
    return estimate_gve(build_stacked_system(panel, scheme, InstrumentKind::Z1));
}

PartitionEstimate PartitionEstimate::from(const GveFit& fit) {
    const Eigen::Index d = fit.theta.size();
    return PartitionEstimate{fit.scheme, fit.theta, fit.influence.leftCols(d), fit.theta_vcov()};
}

PartitionEstimate PartitionEstimate::from(const LassoIvFit& fit) {
    return PartitionEstimate{fit.scheme, fit.theta, fit.influence, fit.vcov};
}

Matrix cross_partition_covariance(const std::vector<PartitionEstimate>& per_partition) {
    if (per_partition.empty()) return Matrix();
    const Eigen::Index n = per_partition.front().influence.rows();
    const Eigen::Index d = per_partition.front().influence.cols();
    Matrix stacked(n, d * static_cast<Eigen::Index>(per_partition.size()));
    for (std::size_t q = 0; q < per_partition.size(); ++q) {
        const Matrix& inf = per_partition[q].influence;
        if (inf.rows() != n || inf.cols() != d) throw ValidationError("partition influence shapes differ");
        stacked.middleCols(static_cast<Eigen::Index>(q) * d, d) = inf;
    }
    Matrix sigma = stacked.transpose() * stacked;
    linalg::symmetrize(sigma);
    return sigma;
}

Matrix WgveFit::vartheta_se() const {
    Matrix se(vartheta.rows(), vartheta.cols());
    for (Eigen::Index c = 0; c < vartheta.size(); ++c) se(c) = std::sqrt(std::max(vcov(c, c), 0.0));
    return se;
}

WgveFit combine_weighted(std::vector<PartitionEstimate> per_partition, std::vector<Matrix> weights) {
    if (per_partition.empty()) throw ValidationError("no partitions to combine");
    if (per_partition.size() != weights.size()) {
        throw ValidationError("got " + std::to_string(weights.size()) + " weights for " +
                              std::to_string(per_partition.size()) + " partitions");
    }
    const Eigen::Index rows = per_partition.front().theta.rows();
    const Eigen::Index cols = per_partition.front().theta.cols();
    const Eigen::Index d = rows * cols;
    Matrix wsum = Matrix::Zero(d, d);
    for (std::size_t q = 0; q < weights.size(); ++q) {
        if (weights[q].rows() != d || weights[q].cols() != d) throw ValidationError("weight matrix has the wrong size");
        if (per_partition[q].theta.rows() != rows || per_partition[q].theta.cols() != cols) {
            throw ValidationError("partition estimates have different shapes");
        }
        wsum += weights[q];
    }
    const double dev = (wsum - Matrix::Identity(d, d)).cwiseAbs().rowwise().sum().maxCoeff();
    if (dev > kWeightSumTolerance) {
        throw WeightSumError("weights sum to I only within " + std::to_string(dev));
    }

    WgveFit fit;
    Vector combined = Vector::Zero(d);
    for (std::size_t q = 0; q < weights.size(); ++q) {
        combined += weights[q] * per_partition[q].theta.reshaped();
    }
    fit.vartheta = combined.reshaped(rows, cols);

    const Matrix sigma = cross_partition_covariance(per_partition);
    const Eigen::Index qn = static_cast<Eigen::Index>(weights.size());
    Matrix w_row(d, d * qn);
    for (Eigen::Index q = 0; q < qn; ++q) w_row.middleCols(q * d, d) = weights[static_cast<std::size_t>(q)];
    fit.vcov = w_row * sigma * w_row.transpose();
    linalg::symmetrize(fit.vcov);
    fit.per_partition = std::move(per_partition);
    fit.weights = std::move(weights);
    return fit;
}

std::vector<Matrix> equal_weights(std::size_t q, Eigen::Index dim) {
    if (q == 0) throw ValidationError("no partitions to weight");
    return std::vector<Matrix>(q, Matrix::Identity(dim, dim) / static_cast<double>(q));
}

std::vector<Matrix> optimal_weights(const Matrix& sigma, std::size_t q, Eigen::Index dim) {
    const Eigen::Index total = static_cast<Eigen::Index>(q) * dim;
    if (q == 0 || sigma.rows() != total || sigma.cols() != total) {
        throw ValidationError("stacked covariance does not match Q and the block size");
    }
    Matrix iota(total, dim);
    for (std::size_t b = 0; b < q; ++b) iota.middleRows(static_cast<Eigen::Index>(b) * dim, dim).setIdentity();
    // S^{-1} (iota (x) I), then the dim x dim normalizer.
    const Matrix s_inv_iota = linalg::solve(sigma, iota, "stacked partition covariance");
    Matrix norm = iota.transpose() * s_inv_iota;
    linalg::symmetrize(norm);
    const Matrix lead = linalg::solve(norm, s_inv_iota.transpose(), "GLS weight normalizer");
    std::vector<Matrix> out;
    out.reserve(q);
    for (std::size_t b = 0; b < q; ++b) out.push_back(lead.middleCols(static_cast<Eigen::Index>(b) * dim, dim));
    return out;
}

WgveFit estimate_wgve(const ResidualPanel& residuals, const NormalizationSet& set, const WgveOptions& options) {
    if (set.partitions.empty()) throw ValidationError("normalization set is empty");
    std::vector<PartitionEstimate> kept;
    std::size_t dropped = 0;
    for (const PartitionScheme& scheme : set.partitions) {
        try {
            switch (options.first_stage) {
                case FirstStage::BlockAverage:
                case FirstStage::AllGroups: {
                    const auto kind = options.first_stage == FirstStage::BlockAverage ? InstrumentKind::Z1
                                                                                      : InstrumentKind::Z2;
                    const GveFit fit = estimate_gve(build_stacked_system(residuals.as_panel(), scheme, kind));
                    if (fit.weak_instruments) {
                        ++dropped;
                        continue;
                    }
                    kept.push_back(PartitionEstimate::from(fit));
                    break;
                }
                case FirstStage::Lasso:
                    kept.push_back(PartitionEstimate::from(estimate_theta_lasso_iv(residuals, scheme, options.penalty)));
                    break;
            }
        } catch (const RankError&) {
            ++dropped;
        }
    }
    if (kept.empty()) throw RankError("every partition had a singular or weak first stage");

    const Eigen::Index d = kept.front().theta.size();
    std::vector<Matrix> weights;
    bool fallback = false;
    switch (options.weighting) {
        case Weighting::Equal:
            weights = equal_weights(kept.size(), d);
            break;
        case Weighting::Optimal:
            try {
                weights = optimal_weights(cross_partition_covariance(kept), kept.size(), d);
            } catch (const RankError&) {
                weights = equal_weights(kept.size(), d);
                fallback = true;
            }
            break;
        case Weighting::User:
            if (dropped != 0) {
                throw ValidationError(std::to_string(dropped) + " partitions were dropped; user weights no longer match");
            }
            weights = options.user_weights;
            break;
    }
    WgveFit fit = combine_weighted(std::move(kept), std::move(weights));
    fit.dropped = dropped;
    fit.optimal_fallback = fallback;
    return fit;
}

}  // namespace gve
