#pragma once

// Deterministic text output: floats always carry 17 significant digits so
// reports round-trip exactly and compare byte for byte.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace indeltree::report {

inline constexpr int kSchemaVersion = 1;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void write_string(std::ostream& os, const std::string& s) {
  os << nlohmann::json(s).dump();
}

inline void write(std::ostream& os, const nlohmann::json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad;
        write_string(os, it.key());
        os << ": ";
        write(os, it.value(), indent, depth + 1);
      }
      os << '\n' << close << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write(os, j[i], indent, depth + 1);
      }
      os << '\n' << close << ']';
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double x = j.get<double>();
      // JSON has no NaN or infinity; those become null.
      if (std::isfinite(x)) os << format_double(x);
      else os << "null";
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Pretty-printed JSON with 17-digit floats. Object keys keep
/// nlohmann's sorted order, so output is independent of insertion order.
inline std::string dump(const nlohmann::json& j, int indent = 2) {
  std::ostringstream os;
  detail::write(os, j, indent, 0);
  os << '\n';
  return os.str();
}

}  // namespace indeltree::report
