#pragma once

// Helpers for reading typed values out of toml++ tables with errors that
// carry the source name, line and dotted field path.

#include <optional>
#include <string>

#include "depthsim/error.hpp"
#include "depthsim/math.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace depthsim::toml_util {

struct Ctx {
  std::string source;

  [[noreturn]] void fail(const toml::node* node, const std::string& field, const std::string& what) const {
    const int line = node ? static_cast<int>(node->source().begin.line) : 0;
    throw ParseError(source, line, field + ": " + what);
  }
};

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline std::optional<double> opt_number(const Ctx& ctx, const toml::table& t, const std::string& key,
                                        const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<double>()) return *v;
  ctx.fail(n, join(prefix, key), "expected a number");
}

inline double number(const Ctx& ctx, const toml::table& t, const std::string& key, const std::string& prefix,
                     double fallback) {
  return opt_number(ctx, t, key, prefix).value_or(fallback);
}

inline double required_number(const Ctx& ctx, const toml::table& t, const std::string& key,
                              const std::string& prefix) {
  if (auto v = opt_number(ctx, t, key, prefix)) return *v;
  ctx.fail(&t, join(prefix, key), "missing required number");
}

inline std::optional<std::int64_t> opt_integer(const Ctx& ctx, const toml::table& t, const std::string& key,
                                               const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (n->is_integer()) return n->as_integer()->get();
  ctx.fail(n, join(prefix, key), "expected an integer");
}

inline std::int64_t integer(const Ctx& ctx, const toml::table& t, const std::string& key, const std::string& prefix,
                            std::int64_t fallback) {
  return opt_integer(ctx, t, key, prefix).value_or(fallback);
}

inline std::optional<bool> opt_bool(const Ctx& ctx, const toml::table& t, const std::string& key,
                                    const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<bool>()) return *v;
  ctx.fail(n, join(prefix, key), "expected a boolean");
}

inline std::optional<std::string> opt_string(const Ctx& ctx, const toml::table& t, const std::string& key,
                                             const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if (auto v = n->value<std::string>()) return *v;
  ctx.fail(n, join(prefix, key), "expected a string");
}

inline std::string required_string(const Ctx& ctx, const toml::table& t, const std::string& key,
                                   const std::string& prefix) {
  if (auto v = opt_string(ctx, t, key, prefix)) return *v;
  ctx.fail(&t, join(prefix, key), "missing required string");
}

inline std::vector<double> number_array(const Ctx& ctx, const toml::node& n, const std::string& field,
                                        std::size_t expected) {
  const toml::array* arr = n.as_array();
  if (!arr || arr->size() != expected)
    ctx.fail(&n, field, "expected an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  for (const auto& el : *arr) {
    auto v = el.value<double>();
    if (!v) ctx.fail(&el, field, "expected a number");
    out.push_back(*v);
  }
  return out;
}

inline std::optional<Vec3> opt_vec3(const Ctx& ctx, const toml::table& t, const std::string& key,
                                    const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  const auto v = number_array(ctx, *n, join(prefix, key), 3);
  return Vec3{v[0], v[1], v[2]};
}

inline Vec3 vec3(const Ctx& ctx, const toml::table& t, const std::string& key, const std::string& prefix,
                 const Vec3& fallback) {
  return opt_vec3(ctx, t, key, prefix).value_or(fallback);
}

inline const toml::table* opt_table(const Ctx& ctx, const toml::table& t, const std::string& key,
                                    const std::string& prefix) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  if (const auto* tt = n->as_table()) return tt;
  ctx.fail(n, join(prefix, key), "expected a table");
}

inline toml::array to_array(const Vec3& v) { return toml::array{v.x, v.y, v.z}; }

}  // namespace depthsim::toml_util
