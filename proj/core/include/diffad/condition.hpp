#pragma once

#include "diffad/common.hpp"

namespace diffad {

// The condition vector c fed to the denoiser. The null (unconditional) case
// is the all-zero vector with is_null set.
struct ConditionEmbedding {
    std::vector<double> values;
    bool is_null = false;
};

inline ConditionEmbedding null_condition(size_t d_e) {
    ConditionEmbedding c;
    c.values.assign(d_e, 0.0);
    c.is_null = true;
    return c;
}

}  // namespace diffad
