#pragma once

// Uniform (u,v) coordinate grids, second-order finite differences and a
// deterministic row-parallel loop.
//
// Nodes are stored row-major with index j*nu + i, i along u and j along v.

#include "isothermic/lorentz.hpp"

#include <functional>
#include <vector>

namespace isothermic {

struct CoordGrid {
  int nu = 0;
  int nv = 0;
  double u_min = 0.0;
  double v_min = 0.0;
  double hu = 0.0;
  double hv = 0.0;
  bool periodic_u = false;
  bool periodic_v = false;

  /// Builds a grid over [u0,u1] x [v0,v1]. A periodic direction excludes the
  /// endpoint (h = length/N); otherwise both endpoints are samples.
  static CoordGrid make(int nu, int nv, double u0, double u1, double v0, double v1, bool periodic_u,
                        bool periodic_v);

  /// Throws GeometryError unless nu, nv >= 8 and spacings are positive.
  void validate() const;

  int size() const { return nu * nv; }
  int index(int i, int j) const { return j * nu + i; }
  double u(int i) const { return u_min + hu * i; }
  double v(int j) const { return v_min + hv * j; }
  double u_max() const { return periodic_u ? u_min + hu * nu : u(nu - 1); }
  double v_max() const { return periodic_v ? v_min + hv * nv : v(nv - 1); }
  /// Same grid with every spacing halved and node counts doubled.
  CoordGrid refined() const;
};

template <class T>
using Field = std::vector<T>;

namespace fd {

namespace detail {

// Derivative along one axis of a strided 1D line.
template <class T, class Get>
T first(Get get, int k, int count, double h, bool periodic) {
  if (periodic) return (get((k + 1) % count) - get((k - 1 + count) % count)) / (2.0 * h);
  if (k == 0) return (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h);
  if (k == count - 1) return (3.0 * get(count - 1) - 4.0 * get(count - 2) + get(count - 3)) / (2.0 * h);
  return (get(k + 1) - get(k - 1)) / (2.0 * h);
}

template <class T, class Get>
T second(Get get, int k, int count, double h, bool periodic) {
  const double h2 = h * h;
  if (periodic) return (get((k + 1) % count) - 2.0 * get(k) + get((k - 1 + count) % count)) / h2;
  if (k == 0) return (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / h2;
  if (k == count - 1)
    return (2.0 * get(count - 1) - 5.0 * get(count - 2) + 4.0 * get(count - 3) - get(count - 4)) / h2;
  return (get(k + 1) - 2.0 * get(k) + get(k - 1)) / h2;
}

}  // namespace detail

/// Second-order derivative fields; central inside, one-sided at open
/// boundaries, wrapped in periodic directions.
template <class T>
Field<T> d_u(const CoordGrid& g, const Field<T>& a) {
  Field<T> out(a.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      out[g.index(i, j)] = detail::first<T>([&](int k) -> const T& { return a[g.index(k, j)]; }, i, g.nu, g.hu,
                                            g.periodic_u);
  return out;
}

template <class T>
Field<T> d_v(const CoordGrid& g, const Field<T>& a) {
  Field<T> out(a.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      out[g.index(i, j)] = detail::first<T>([&](int k) -> const T& { return a[g.index(i, k)]; }, j, g.nv, g.hv,
                                            g.periodic_v);
  return out;
}

template <class T>
Field<T> d_uu(const CoordGrid& g, const Field<T>& a) {
  Field<T> out(a.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      out[g.index(i, j)] = detail::second<T>([&](int k) -> const T& { return a[g.index(k, j)]; }, i, g.nu, g.hu,
                                             g.periodic_u);
  return out;
}

template <class T>
Field<T> d_vv(const CoordGrid& g, const Field<T>& a) {
  Field<T> out(a.size());
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      out[g.index(i, j)] = detail::second<T>([&](int k) -> const T& { return a[g.index(i, k)]; }, j, g.nv, g.hv,
                                             g.periodic_v);
  return out;
}

}  // namespace fd

/// Number of worker threads used by parallel_for (default 1).
void set_thread_count(int threads);
int thread_count();

/// Runs body(k) for k in [0, count). Work is split into contiguous blocks;
/// each k writes only its own outputs, so results do not depend on the
/// schedule.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace isothermic
