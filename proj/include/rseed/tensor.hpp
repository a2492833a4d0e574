#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rseed {

// Domain error with a stable message; CLI maps these to exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense shapes up to rank 4. Layout is channels x height x width with an
// optional leading batch dim; rank 0 is a scalar.
struct Shape {
    std::array<int, 4> d{1, 1, 1, 1};
    int rank = 0;

    Shape() = default;
    static Shape scalar() { return Shape{}; }
    static Shape vec(int n) {
        Shape s;
        s.rank = 1;
        s.d[0] = n;
        return s;
    }
    static Shape chw(int c, int h, int w) {
        Shape s;
        s.rank = 3;
        s.d[0] = c;
        s.d[1] = h;
        s.d[2] = w;
        return s;
    }
    static Shape conv(int oc, int ic, int kh, int kw) {
        Shape s;
        s.rank = 4;
        s.d[0] = oc;
        s.d[1] = ic;
        s.d[2] = kh;
        s.d[3] = kw;
        return s;
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < rank; ++i) n *= d[i];
        return n;
    }
    bool operator==(const Shape& o) const {
        if (rank != o.rank) return false;
        for (int i = 0; i < rank; ++i)
            if (d[i] != o.d[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        if (rank == 0) return "[]";
        std::string s = "[";
        for (int i = 0; i < rank; ++i) {
            if (i) s += "x";
            s += std::to_string(d[i]);
        }
        return s + "]";
    }
};

namespace detail {

// Leaves default-constructed elements uninitialized instead of value-
// initializing them, so Tensor::uninit can skip the zero fill on buffers a
// kernel is about to overwrite in full.
template <class T>
struct default_init_alloc : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = default_init_alloc<U>;
    };
    template <class U>
    void construct(U* p) noexcept(noexcept(::new (static_cast<void*>(p)) U)) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

} // namespace detail

// Plain dense float32 container. Autodiff bookkeeping lives in Tape, not here.
struct Tensor {
    Shape shape;
    std::vector<float, detail::default_init_alloc<float>> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(static_cast<size_t>(s.numel()), 0.0f) {}
    Tensor(Shape s, float fill) : shape(s), data(static_cast<size_t>(s.numel()), fill) {}

    // contents are garbage until written; callers must overwrite every element
    static Tensor uninit(Shape s) {
        Tensor t;
        t.shape = s;
        t.data.resize(static_cast<size_t>(s.numel()));
        return t;
    }

    static Tensor scalar(float v) {
        Tensor t{Shape::scalar()};
        t.data[0] = v;
        return t;
    }

    int64_t numel() const { return shape.numel(); }
    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape.d[1] + y) * shape.d[2] + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape.d[1] + y) * shape.d[2] + x];
    }
};

inline void check_shape(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace rseed
