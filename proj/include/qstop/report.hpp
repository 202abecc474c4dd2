#pragma once

// JSON serialization of a BoundsReport with fixed key names and numbers
// printed at 17 significant digits, plus the verbatim configuration the run
// used (config_echo), so a report can be reproduced from itself.

#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>

#include "qstop/bounds.hpp"

namespace qstop {

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string json_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 16);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

}  // namespace detail

inline std::string report_to_json(const BoundsReport& r, std::string_view config_echo) {
  std::string out = "{\n";
  auto real_field = [&](const char* key, double v, bool comma = true) {
    out += "  \"";
    out += key;
    out += "\": ";
    out += detail::format_real(v);
    if (comma) out += ",";
    out += "\n";
  };
  auto int_field = [&](const char* key, std::uint64_t v) {
    out += "  \"";
    out += key;
    out += "\": ";
    out += std::to_string(v);
    out += ",\n";
  };
  real_field("l_hat", r.l_hat);
  real_field("sigma_l", r.sigma_l);
  real_field("u_hat", r.u_hat);
  real_field("sigma_u", r.sigma_u);
  real_field("point_estimate", r.point_estimate);
  real_field("ci_low", r.ci_low);
  real_field("ci_high", r.ci_high);
  real_field("alpha", r.alpha);
  int_field("m_l", r.m_l);
  int_field("m_u", r.m_u);
  int_field("j_inner", r.j_inner);
  int_field("seed_train", r.seed_train);
  int_field("seed_eval", r.seed_eval);
  real_field("runtime_seconds", r.runtime_seconds);
  out += "  \"config_echo\": \"" + detail::json_escape(config_echo) + "\"\n";
  out += "}\n";
  return out;
}

inline void emit_report(const BoundsReport& r, std::string_view config_echo,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path);
  out << report_to_json(r, config_echo);
  if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

}  // namespace qstop
