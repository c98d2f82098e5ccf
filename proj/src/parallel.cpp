#include "twoscale/parallel.hpp"

namespace twoscale {

namespace {
std::atomic<unsigned> g_max_jobs{0};
}

void set_max_jobs(unsigned jobs) noexcept { g_max_jobs.store(jobs); }

unsigned max_jobs() noexcept {
  const unsigned jobs = g_max_jobs.load();
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace twoscale
