#include "isothermic/conserved.hpp"
#include "isothermic/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace isothermic {

namespace {

constexpr const char* kMagic = "isothermic-section";

std::string read_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("section file truncated before '" + key + "'");
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw IoError("section file: expected '" + key + "', found '" + got + "'");
  std::string rest;
  std::getline(ls, rest);
  return rest;
}

template <class T>
std::vector<T> numbers(const std::string& text, std::size_t count, const std::string& what) {
  std::istringstream in(text);
  std::vector<T> out;
  T x{};
  while (in >> x) out.push_back(x);
  if (out.size() != count || !in.eof()) throw IoError("section file: malformed '" + what + "' entry");
  return out;
}

}  // namespace

void write_section(std::ostream& out, const PolynomialSection& p) {
  const CoordGrid& g = p.grid;
  out << std::setprecision(17);
  out << kMagic << " 1\n";
  out << "d " << p.degree << '\n';
  out << "n " << p.n << '\n';
  out << "grid " << g.nu << ' ' << g.nv << '\n';
  out << "periodic " << (g.periodic_u ? 1 : 0) << ' ' << (g.periodic_v ? 1 : 0) << '\n';
  out << "domain " << g.u_min << ' ' << g.u_max() << ' ' << g.v_min << ' ' << g.v_max() << '\n';
  out << "residual " << p.residual << '\n';
  for (std::size_t k = 0; k < static_cast<std::size_t>(g.size()); ++k) {
    for (const auto& c : p.coeffs)
      for (Eigen::Index a = 0; a < c[k].size(); ++a) out << (a == 0 && &c == &p.coeffs.front() ? "" : " ") << c[k](a);
    out << '\n';
  }
  if (!out) throw IoError("failed writing section data");
}

void write_section(const std::filesystem::path& path, const PolynomialSection& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_section(out, p);
}

PolynomialSection read_section(std::istream& in) {
  const auto version = numbers<int>(read_key(in, kMagic), 1, kMagic).front();
  if (version != 1) throw IoError("section file: unsupported version");
  PolynomialSection p;
  p.degree = numbers<int>(read_key(in, "d"), 1, "d").front();
  p.n = numbers<int>(read_key(in, "n"), 1, "n").front();
  if (p.degree < 0 || p.degree > 4 || p.n < 2 || p.n > 16) throw IoError("section file: unsupported d or n");
  const auto dims = numbers<int>(read_key(in, "grid"), 2, "grid");
  const auto per = numbers<int>(read_key(in, "periodic"), 2, "periodic");
  const auto dom = numbers<double>(read_key(in, "domain"), 4, "domain");
  p.residual = numbers<double>(read_key(in, "residual"), 1, "residual").front();
  if (dims[0] < 8 || dims[1] < 8 || dims[0] > 1 << 14 || dims[1] > 1 << 14)
    throw IoError("section file: grid dimensions out of range");
  p.grid = CoordGrid::make(dims[0], dims[1], dom[0], dom[1], dom[2], dom[3], per[0] != 0, per[1] != 0);
  const auto size = static_cast<std::size_t>(p.grid.size());
  const int N = p.n + 2;
  p.coeffs.assign(static_cast<std::size_t>(p.degree + 1), Field<LorentzVector>(size, LorentzVector(N)));
  std::string line;
  for (std::size_t k = 0; k < size; ++k) {
    if (!std::getline(in, line)) throw IoError("section file: truncated data at node " + std::to_string(k));
    const auto v = numbers<double>(line, static_cast<std::size_t>((p.degree + 1) * N), "node " + std::to_string(k));
    for (int b = 0; b <= p.degree; ++b)
      for (int a = 0; a < N; ++a) p.coeffs[static_cast<std::size_t>(b)][k](a) = v[static_cast<std::size_t>(b * N + a)];
  }
  return p;
}

PolynomialSection read_section(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_section(in);
}

}  // namespace isothermic
