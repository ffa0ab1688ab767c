#pragma once

#include <cstddef>
#include <functional>

namespace expstop {

/// Worker threads to use: EXPSTOP_THREADS when set to a positive integer, else hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers (0: worker_count()).
/// Each index runs exactly once; callers write to disjoint outputs so results do not
/// depend on scheduling. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 0);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x);
    double value() const { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

}  // namespace expstop
