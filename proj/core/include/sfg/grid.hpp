#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfg {

/// Dense row-major 2D array. Row index is the image v axis, column index u.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int r, int c) { return data_[index(r, c)]; }
    const T& operator()(int r, int c) const { return data_[index(r, c)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int r, int c) const noexcept {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
    }
    bool inside(int r, int c) const noexcept { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    template <class U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static std::size_t checked_size(int rows, int cols) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("negative grid dimension");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using GridD = Grid<double>;
/// Validity mask; nonzero means masked-in.
using Mask = Grid<std::uint8_t>;

inline std::size_t count_valid(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m.values()) n += v ? 1 : 0;
    return n;
}

inline std::string shape_string(int rows, int cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

} // namespace sfg
