#include "wavefront_lab/common.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wfl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EvaluationDomain: return "evaluation-domain";
    case ErrorKind::StepSize: return "step-size";
    case ErrorKind::Tolerance: return "tolerance";
    case ErrorKind::NumericalConsistency: return "numerical-consistency";
    case ErrorKind::IllConditionedExcess: return "ill-conditioned-excess";
    case ErrorKind::CleanIntersection: return "clean-intersection";
    case ErrorKind::DegenerateRecurrence: return "degenerate-recurrence";
    case ErrorKind::Composition: return "composition";
    case ErrorKind::Caustic: return "caustic";
    case ErrorKind::Confinement: return "confinement";
    case ErrorKind::Scale: return "scale";
    case ErrorKind::InsufficientScales: return "insufficient-scales";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Unsupported: return "unsupported";
  }
  return "unknown";
}

}  // namespace wfl

namespace wfl {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace wfl
