#include "report.hpp"

#include "isothermic/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace isocalc {

namespace {

void emit(std::string& out, const Report& value, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (value.type()) {
    case Report::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Report(key).dump() + ": ";
        emit(out, item, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Report::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        emit(out, value[i], indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case Report::value_t::number_float: {
      const double x = value.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.16e", x);
      out += buf;
      return;
    }
    default:
      out += value.dump();
  }
}

}  // namespace

std::string serialize(const Report& report) {
  std::string out;
  emit(out, report, 0);
  out += "\n";
  return out;
}

void write_report(const std::filesystem::path& path, const Report& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw isothermic::IoError("cannot write report " + path.string());
  out << serialize(report);
  if (!out) throw isothermic::IoError("failed writing report " + path.string());
}

}  // namespace isocalc
