#pragma once

#include <array>
#include <cmath>

namespace hvsim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] constexpr double dot(const Vec3& o) const noexcept {
        return x * o.x + y * o.y + z * o.z;
    }
    [[nodiscard]] double norm() const noexcept { return std::sqrt(dot(*this)); }
    [[nodiscard]] bool finite() const noexcept {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    friend constexpr Vec3 operator*(double s, const Vec3& v) noexcept {
        return {s * v.x, s * v.y, s * v.z};
    }
    friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) noexcept {
        return {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) noexcept {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Unit vector in the x-z plane at polar angle `theta` from +z.
inline Vec3 planar_unit(double theta) { return {std::sin(theta), 0.0, std::cos(theta)}; }

}  // namespace hvsim
