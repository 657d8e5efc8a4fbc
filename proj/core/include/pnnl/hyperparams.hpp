#pragma once

#include <cstdint>

namespace pnnl {

// One hyperparameter combination for a block optimization problem.
struct HyperParams {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double dropout_rate = 0.0;
    std::uint32_t epochs = 1;

    // Throws ConfigError when a value is out of range.
    void validate() const;

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

}  // namespace pnnl
