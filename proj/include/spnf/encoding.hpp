#pragma once

#include <cmath>

namespace spnf {

struct EncodingConfig {
    int levels_pos = 10;
    int levels_dir = 4;
    bool include_input = true;
};

inline int encoded_dim(int n, int levels, bool include_input) {
    return n * ((include_input ? 1 : 0) + 2 * levels);
}

// Writes [v?, sin(2^0 v), cos(2^0 v), ..., sin(2^{L-1} v), cos(2^{L-1} v)]
// componentwise into out (encoded_dim(n, levels, include_input) values).
template <typename S>
void positional_encode(const S* v, int n, int levels, bool include_input, S* out) {
    int o = 0;
    if (include_input)
        for (int i = 0; i < n; ++i) out[o++] = v[i];
    S freq = S(1);
    for (int j = 0; j < levels; ++j) {
        for (int i = 0; i < n; ++i) out[o++] = std::sin(freq * v[i]);
        for (int i = 0; i < n; ++i) out[o++] = std::cos(freq * v[i]);
        freq *= S(2);
    }
}

}  // namespace spnf
