#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::nc {

struct GradCheckOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    std::size_t coords_per_param = 32;
    // Denominator floor for the relative error, so coordinates whose true
    // gradient is ~0 are judged on absolute error instead.
    double rel_floor = 1e-6;
    std::uint64_t seed = 7;
};

struct GradCheckEntry {
    std::string name;
    std::size_t coords_checked = 0;
    std::size_t worst_index = 0;
    double max_rel_error = 0.0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;

    bool passed() const;
    // Entry with the largest relative error; nullptr when empty.
    const GradCheckEntry* worst() const;
    std::string summary() const;
};

// relative error |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// Compares backward() against central differences for sampled coordinates of
// each parameter. `loss_fn` must be deterministic and return a 1 x 1 tensor.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::vector<Parameter>& params,
                           const GradCheckOptions& options = {});

// Runs one small fragment per differentiable primitive; entries are named
// after the op, so a broken backward rule is reported by name.
GradCheckReport grad_check_ops(const GradCheckOptions& options = {});

}  // namespace fraudfuse::nc
