#pragma once

#include <cstddef>
#include <vector>

namespace fedsim {

// Row-major dense matrix.
template <typename T>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    T* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const T* row_ptr(std::size_t i) const { return data.data() + i * cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

} // namespace fedsim
