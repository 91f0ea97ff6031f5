#pragma once

// Randomized finite-difference checks of every differentiable operation,
// shared by the `gradcheck` command and the test suite.

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cagewarp {

struct GradCheckOptions {
    std::size_t n_configs = 10;
    std::uint64_t seed = 0;
    double fd_step = 1e-5;
    /// Multiplies every analytic gradient; anything but 1 should fail.
    double corrupt = 1.0;
};

struct GradCheckReport {
    std::string op;
    std::size_t n_configs = 0;
    std::uint64_t seed = 0;
    double fd_step = 0.0;
    double max_rel_err = 0.0;
    /// Per argument group: "source_cage" (rtol 1e-3), "deformed_cage"
    /// (rtol 1e-4), "parameters" (rtol 1e-3).
    struct Group {
        std::string name;
        double rtol = 0.0;
        double max_rel_err = 0.0;
        bool pass = true;
    };
    std::vector<Group> groups;
    /// Rows skipped near branch switches: counted by the gradient routine
    /// and expected from the coordinate flags.
    std::size_t excluded_rows = 0;
    std::size_t expected_excluded_rows = 0;
    bool pass = true;
    std::string note;
};

inline constexpr double kSourceCageRtol = 1e-3;
inline constexpr double kDeformedCageRtol = 1e-4;

std::vector<std::string> gradcheck_ops();
/// Throws Error for an unknown op.
GradCheckReport run_gradcheck(std::string_view op, const GradCheckOptions& options = {});

nlohmann::json to_json(const GradCheckReport& report);

}  // namespace cagewarp
