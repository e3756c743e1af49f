#pragma once

// The pencil of flat metric connections d + t eta realized as parallel
// transport along grid edges.

#include "isothermic/surface.hpp"

#include <vector>

namespace isothermic {

/// Directed edge between adjacent nodes; axis 0 is u, axis 1 is v and step
/// is the signed number of grid spacings (+1 or -1).
struct Edge {
  int from = 0;
  int to = 0;
  int axis = 0;
  int step = 1;
};

/// Spanning tree "first the base column along v, then every row along u".
/// Tree edges are listed in integration order. Cross edges are the
/// remaining interior edges; wrap edges close periodic directions.
struct IntegrationTree {
  int base_node = 0;
  std::vector<Edge> tree;
  std::vector<Edge> cross;
  std::vector<Edge> wrap;
};

IntegrationTree integration_tree(const CoordGrid& grid, int base_node = 0);

/// Edge from node `from` to the adjacent node `to`, wrapping in periodic
/// directions. Throws GeometryError if the nodes are not adjacent.
Edge make_edge(const CoordGrid& grid, int from, int to);

/// Magnus exponent for Y' = A(s) Y over a signed step h, from the values and
/// s-derivatives of A at both ends. Order 2 is the midpoint rule
/// h (A0 + A1)/2; order 4 adds the Hermite and commutator corrections
/// h^2/12 (A0' - A1') + h^2/12 [A1, A0].
Eigen::MatrixXd magnus_exponent(const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1, const Eigen::MatrixXd& da0,
                                const Eigen::MatrixXd& da1, double h, int order);

/// Transport of d + t eta along an edge: Y(to) = T Y(from).
OrthogonalMap edge_transport(const EtaField& eta, const Edge& edge, double t, int order = 2);

/// Parallel transport generator for a fixed EtaField. The field must outlive
/// the atlas.
struct TransportAtlas {
  const EtaField* eta = nullptr;
  int order = 4;

  OrthogonalMap transport(const Edge& edge, double t) const { return edge_transport(*eta, edge, t, order); }
  const CoordGrid& grid() const { return eta->grid; }
};

inline TransportAtlas make_atlas(const EtaField& eta, int order = 4) { return {&eta, order}; }

/// Max over plaquettes of |loop - I| divided by the plaquette area, i.e. the
/// discrete curvature density of d + t eta.
double holonomy_residual(const EtaField& eta, double t, int order = 2);

struct ParallelSection {
  double t = 0.0;
  Field<LorentzVector> values;
  int base_node = 0;
  LorentzVector base_value;
  double consistency = 0.0;  // max mismatch across interior non-tree edges
  double monodromy = 0.0;    // max mismatch across periodic wrap edges
  double norm_drift = 0.0;   // max |(s, s) - (s0, s0)|
};

ParallelSection parallel_section(const TransportAtlas& atlas, double t, const LorentzVector& base_value,
                                 int base_node = 0);

struct ParallelFrame {
  double s = 0.0;
  Field<OrthogonalMap> phi;     // Phi_s, with Phi_s^{-1} the transport from the base node
  double gauge_residual = 0.0;  // max |d(Phi^{-1}) + s eta Phi^{-1}| by central differences
  double orthogonality = 0.0;   // max Gram deviation of Phi_s
};

ParallelFrame parallel_frame(const TransportAtlas& atlas, double s, int base_node = 0);

/// Transport matrices from the base node along the tree, for a general
/// linear system Y' = A Y given by a callback returning the generator and
/// its derivative at a node along an axis.
struct LinearGenerator {
  virtual ~LinearGenerator() = default;
  virtual Eigen::MatrixXd value(int node, int axis) const = 0;
  virtual Eigen::MatrixXd derivative(int node, int axis) const = 0;
};

Eigen::MatrixXd step_matrix(const LinearGenerator& gen, const CoordGrid& grid, const Edge& edge, int order);

}  // namespace isothermic
