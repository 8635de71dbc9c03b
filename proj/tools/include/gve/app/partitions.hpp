#pragma once

#include "gve/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace gve::app {

struct PartitionsQuery {
    int j_total = 0;
    int m_a0 = 1;
    int m_aj = 1;
    int r = 1;
    std::uint64_t c = 1;
    /// Explicit A0 (0-based); defaults to the first m_a0 groups.
    IndexSet a0;
    /// Lists at most this many partitions; defaults to Q_J*.
    std::optional<std::uint64_t> cap;
};

/// Text report: Q_J, Q_J* and a CSV listing of the first partitions with
/// 1-based group numbers. Throws CapacityError with a hint to pass a cap.
std::string describe_partitions(const PartitionsQuery& query);

}  // namespace gve::app
