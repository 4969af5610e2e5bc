#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <vector>

namespace mcsfb {

/// Samples of one band's filtered signal, keyed by vertex.
struct BandCoefficients {
    std::vector<int> vertices;
    Eigen::VectorXd values;
};

/// Output of an analysis bank. `mean` is set by the signal-adapted fast
/// transform, which removes the signal mean before filtering.
struct AnalysisCoefficients {
    std::vector<BandCoefficients> bands;
    std::optional<double> mean;

    /// Number of stored reals: every band sample plus the mean, if any.
    std::size_t stored_count() const
    {
        std::size_t n = mean ? 1 : 0;
        for (const auto& b : bands)
            n += b.vertices.size();
        return n;
    }
};

} // namespace mcsfb
