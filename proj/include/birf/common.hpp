#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace birf {

// Error taxonomy. Usage/config errors map to CLI exit code 2, the rest to 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

struct Vec3 {
    float x = 0.f, y = 0.f, z = 0.f;

    float& operator[](int i) { return (&x)[i]; }
    float operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(float s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline float dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
    float n = norm(a);
    if (n == 0.f) throw UsageError("cannot normalize zero-length vector");
    return a / n;
}

struct Rgb {
    float r = 0.f, g = 0.f, b = 0.f;

    float& operator[](int i) { return (&r)[i]; }
    float operator[](int i) const { return (&r)[i]; }

    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    Rgb operator-(const Rgb& o) const { return {r - o.r, g - o.g, b - o.b}; }
    Rgb operator*(float s) const { return {r * s, g * s, b * s}; }
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent deterministic RNG streams derived from one master seed, so
// e.g. changing the batch schedule does not perturb parameter init.
struct RngStreams {
    std::mt19937_64 init;
    std::mt19937_64 batch;
    std::mt19937_64 jitter;
    std::mt19937_64 occupancy;

    explicit RngStreams(uint64_t master) {
        uint64_t s = master;
        init.seed(splitmix64(s));
        batch.seed(splitmix64(s));
        jitter.seed(splitmix64(s));
        occupancy.seed(splitmix64(s));
    }
};

double now_ms();

}  // namespace birf
