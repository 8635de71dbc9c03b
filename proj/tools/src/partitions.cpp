#include "gve/app/partitions.hpp"

#include "gve/errors.hpp"
#include "gve/wgve.hpp"

#include <sstream>

namespace gve::app {

namespace {

std::string join(const IndexSet& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ' ';
        out += std::to_string(s[k] + 1);
    }
    return out;
}

}  // namespace

std::string describe_partitions(const PartitionsQuery& q) {
    if (q.j_total < 3) throw ValidationError("J: must be at least 3");
    if (q.m_a0 < 1 || q.m_a0 >= q.j_total) throw ValidationError("m-a0: must lie in 1..J-1");
    IndexSet a0 = q.a0;
    if (a0.empty()) {
        for (int g = 0; g < q.m_a0; ++g) a0.push_back(g);
    } else if (static_cast<int>(a0.size()) != q.m_a0) {
        throw ValidationError("a0: expected " + std::to_string(q.m_a0) + " groups");
    }

    std::ostringstream os;
    // Q_J* is defined for m_AJ = r only.
    const bool truncates = q.m_aj == q.r;
    std::uint64_t q_star = 0;
    if (truncates) {
        try {
            q_star = truncation_q_star(q.j_total, q.m_a0, q.r, q.c);
        } catch (const CapacityError&) {
            if (!q.cap) throw CapacityError("Q_J* does not fit in 64 bits; pass --cap to list a bounded number of partitions");
        }
    }
    std::optional<std::uint64_t> limit = q.cap;
    if (!limit && q_star > 0) limit = q_star;

    NormalizationSet set;
    try {
        set = enumerate_partitions(q.j_total, a0, q.m_aj, q.r, limit);
    } catch (const CapacityError& e) {
        throw CapacityError(std::string(e.what()) + "; pass --cap to list a bounded number of partitions");
    }
    os << "J=" << q.j_total << " m_A0=" << q.m_a0 << " m_AJ=" << q.m_aj << " r=" << q.r << " C=" << q.c << '\n';
    os << "A0=" << join(a0) << '\n';
    os << "Q_J=" << (set.q_total ? std::to_string(*set.q_total) : std::string("overflow")) << '\n';
    os << "Q_J*=" << (!truncates ? std::string("n/a (m_AJ != r)") : q_star > 0 ? std::to_string(q_star) : std::string("overflow")) << '\n';
    os << "listed=" << set.q_used << '\n';
    os << "index,aj,bj\n";
    for (std::size_t k = 0; k < set.partitions.size(); ++k) {
        os << (k + 1) << ',' << join(set.partitions[k].aj) << ',' << join(set.partitions[k].bj) << '\n';
    }
    return os.str();
}

}  // namespace gve::app
