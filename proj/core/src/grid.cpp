#include "isothermic/grid.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace isothermic {

CoordGrid CoordGrid::make(int nu, int nv, double u0, double u1, double v0, double v1, bool periodic_u,
                          bool periodic_v) {
  CoordGrid g;
  g.nu = nu;
  g.nv = nv;
  g.u_min = u0;
  g.v_min = v0;
  g.periodic_u = periodic_u;
  g.periodic_v = periodic_v;
  if (nu < 2 || nv < 2) throw GeometryError("grid needs at least 2 samples per direction");
  g.hu = (u1 - u0) / (periodic_u ? nu : nu - 1);
  g.hv = (v1 - v0) / (periodic_v ? nv : nv - 1);
  return g;
}

void CoordGrid::validate() const {
  if (nu < 8 || nv < 8) throw GeometryError("grid must have at least 8 samples in each direction");
  if (!(hu > 0.0) || !(hv > 0.0)) throw GeometryError("grid spacing must be positive");
}

CoordGrid CoordGrid::refined() const {
  const int ru = periodic_u ? 2 * nu : 2 * nu - 1;
  const int rv = periodic_v ? 2 * nv : 2 * nv - 1;
  return make(ru, rv, u_min, u_max(), v_min, v_max(), periodic_u, periodic_v);
}

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) { g_threads = std::max(1, threads); }
int thread_count() { return g_threads; }

void parallel_for(int count, const std::function<void(int)>& body) {
  const int workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = count * w / workers;
    const int end = count * (w + 1) / workers;
    pool.emplace_back([&body, &errors, w, begin, end] {
      try {
        for (int k = begin; k < end; ++k) body(k);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // Rethrow the error of the lowest block so failures are reproducible.
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace isothermic
