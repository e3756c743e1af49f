#pragma once

// Text serialization of surface patches and CSV export of scalar grids.
//
// Surface files start with a header
//   isothermic-surface 1
//   n <n>
//   grid <nu> <nv>
//   periodic <0|1> <0|1>
//   domain <u_min> <u_max> <v_min> <v_max>
//   w <n+2 coordinates>
//   provenance <JSON array on one line>
//   fields f | f,fu,fv,fuu,fuv,fvv
// followed by one line per node in row-major order (i fastest) holding the
// listed R^n vectors. Numbers carry 17 significant digits.

#include "isothermic/surface.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace isothermic {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes the patch; with_jets stores the exact 2-jet so that reading back
/// does not fall back to finite differences.
void write_surface(std::ostream& out, const SurfacePatch& patch, bool with_jets = true);
void write_surface(const std::filesystem::path& path, const SurfacePatch& patch, bool with_jets = true);

/// Parses a surface file. Files holding only f are differentiated by
/// second-order finite differences. Throws IoError on malformed input.
SurfacePatch read_surface(std::istream& in);
SurfacePatch read_surface(const std::filesystem::path& path);

std::string provenance_json(const std::vector<ProvenanceStep>& steps);
std::vector<ProvenanceStep> parse_provenance(const std::string& json);

/// CSV with header i,j,u,v,<name>; LF line endings.
void write_scalar_csv(std::ostream& out, const CoordGrid& grid, const Field<double>& values, const std::string& name);
void write_scalar_csv(const std::filesystem::path& path, const CoordGrid& grid, const Field<double>& values,
                      const std::string& name);

/// Generic CSV table with a header row.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace isothermic
