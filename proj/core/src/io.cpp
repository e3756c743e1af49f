#include "isothermic/io.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace isothermic {

namespace {

constexpr const char* kMagic = "isothermic-surface";

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) out << ' ' << v(k);
}

std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("surface file truncated before '" + key + "'");
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw IoError("surface file: expected '" + key + "', found '" + got + "'");
  std::string rest;
  std::getline(ls, rest);
  const auto start = rest.find_first_not_of(' ');
  return start == std::string::npos ? std::string() : rest.substr(start);
}

template <class T>
std::vector<T> parse_numbers(const std::string& text, std::size_t count, const std::string& what) {
  std::istringstream in(text);
  std::vector<T> out;
  T x{};
  while (in >> x) out.push_back(x);
  if (out.size() != count || !in.eof()) throw IoError("surface file: malformed '" + what + "' entry");
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string provenance_json(const std::vector<ProvenanceStep>& steps) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    arr.push_back({{"kind", s.kind}, {"params", params}});
  }
  return arr.dump();
}

std::vector<ProvenanceStep> parse_provenance(const std::string& json) {
  std::vector<ProvenanceStep> out;
  try {
    const auto arr = nlohmann::ordered_json::parse(json);
    for (const auto& item : arr) {
      ProvenanceStep s;
      s.kind = item.at("kind").get<std::string>();
      for (const auto& [k, v] : item.at("params").items()) s.params.emplace_back(k, v.get<double>());
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("surface file: bad provenance record: ") + e.what());
  }
  return out;
}

void write_surface(std::ostream& out, const SurfacePatch& patch, bool with_jets) {
  const CoordGrid& g = patch.grid;
  out << std::setprecision(17);
  out << kMagic << " 1\n";
  out << "n " << patch.n << '\n';
  out << "grid " << g.nu << ' ' << g.nv << '\n';
  out << "periodic " << (g.periodic_u ? 1 : 0) << ' ' << (g.periodic_v ? 1 : 0) << '\n';
  out << "domain " << g.u_min << ' ' << g.u_max() << ' ' << g.v_min << ' ' << g.v_max() << '\n';
  out << "w";
  write_vector(out, patch.w.w);
  out << '\n';
  out << "provenance " << provenance_json(patch.provenance) << '\n';
  out << "fields " << (with_jets ? "f,fu,fv,fuu,fuv,fvv" : "f") << '\n';
  const auto jets = with_jets ? euclidean_jets(patch) : Field<EuclideanJet>{};
  for (std::size_t k = 0; k < patch.f.size(); ++k) {
    if (with_jets) {
      const auto& e = jets[k];
      for (const auto* v : {&e.f, &e.fu, &e.fv, &e.fuu, &e.fuv, &e.fvv}) write_vector(out, *v);
    } else {
      write_vector(out, patch.f[k]);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing surface data");
}

void write_surface(const std::filesystem::path& path, const SurfacePatch& patch, bool with_jets) {
  auto out = open_out(path);
  write_surface(out, patch, with_jets);
}

SurfacePatch read_surface(std::istream& in) {
  const auto version = expect_key(in, kMagic);
  if (version != "1") throw IoError("surface file: unsupported version '" + version + "'");
  const int n = parse_numbers<int>(expect_key(in, "n"), 1, "n").front();
  if (n < 2 || n > 16) throw IoError("surface file: unsupported dimension");
  const auto dims = parse_numbers<int>(expect_key(in, "grid"), 2, "grid");
  const auto per = parse_numbers<int>(expect_key(in, "periodic"), 2, "periodic");
  const auto dom = parse_numbers<double>(expect_key(in, "domain"), 4, "domain");
  const auto wc = parse_numbers<double>(expect_key(in, "w"), static_cast<std::size_t>(n + 2), "w");
  const auto prov = parse_provenance(expect_key(in, "provenance"));
  const auto fields = expect_key(in, "fields");
  bool jets = false;
  if (fields == "f,fu,fv,fuu,fuv,fvv") {
    jets = true;
  } else if (fields != "f") {
    throw IoError("surface file: unknown field list '" + fields + "'");
  }
  if (dims[0] < 8 || dims[1] < 8 || dims[0] > 1 << 14 || dims[1] > 1 << 14)
    throw IoError("surface file: grid dimensions out of range");

  const CoordGrid grid = CoordGrid::make(dims[0], dims[1], dom[0], dom[1], dom[2], dom[3], per[0] != 0, per[1] != 0);
  LorentzVector w(n + 2);
  for (int k = 0; k < n + 2; ++k) w(k) = wc[static_cast<std::size_t>(k)];

  const std::size_t per_node = static_cast<std::size_t>(n) * (jets ? 6 : 1);
  const auto size = static_cast<std::size_t>(grid.size());
  Field<EuclideanJet> data(size);
  std::string line;
  for (std::size_t k = 0; k < size; ++k) {
    if (!std::getline(in, line)) throw IoError("surface file: truncated data at node " + std::to_string(k));
    const auto values = parse_numbers<double>(line, per_node, "node " + std::to_string(k));
    auto take = [&](std::size_t slot) {
      Eigen::VectorXd v(n);
      for (int c = 0; c < n; ++c) v(c) = values[slot * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
      return v;
    };
    data[k].f = take(0);
    if (jets) {
      data[k].fu = take(1);
      data[k].fv = take(2);
      data[k].fuu = take(3);
      data[k].fuv = take(4);
      data[k].fvv = take(5);
    }
  }

  SurfacePatch patch;
  const SpaceForm form(w);
  if (jets) {
    patch = assemble_patch(grid, data, form);
  } else {
    Field<Eigen::VectorXd> f(size);
    for (std::size_t k = 0; k < size; ++k) f[k] = data[k].f;
    patch = compute_fundamental(grid, f, form);
  }
  patch.provenance = prov;
  return patch;
}

SurfacePatch read_surface(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_surface(in);
}

void write_scalar_csv(std::ostream& out, const CoordGrid& grid, const Field<double>& values, const std::string& name) {
  if (static_cast<int>(values.size()) != grid.size()) throw IoError("CSV export: field size does not match grid");
  out << std::setprecision(17);
  out << "i,j,u,v," << name << '\n';
  for (int j = 0; j < grid.nv; ++j)
    for (int i = 0; i < grid.nu; ++i)
      out << i << ',' << j << ',' << grid.u(i) << ',' << grid.v(j) << ','
          << values[static_cast<std::size_t>(grid.index(i, j))] << '\n';
  if (!out) throw IoError("failed writing CSV");
}

void write_scalar_csv(const std::filesystem::path& path, const CoordGrid& grid, const Field<double>& values,
                      const std::string& name) {
  auto out = open_out(path);
  write_scalar_csv(out, grid, values, name);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace isothermic
