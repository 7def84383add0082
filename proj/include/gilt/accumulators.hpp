#pragma once

#include <cmath>
#include <cstdint>

namespace gilt {

/// Streaming mean / second central moment (Welford), with an exact combine so
/// per-block statistics can be merged in a fixed order independent of which
/// thread produced them.
struct RunningMoments {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    void combine(const RunningMoments& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        double total = static_cast<double>(count + o.count);
        double d = o.mean - mean;
        m2 += o.m2 + d * d * (static_cast<double>(count) * static_cast<double>(o.count)) / total;
        mean += d * static_cast<double>(o.count) / total;
        count += o.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double std_error() const {
        return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
    }
};

}  // namespace gilt
