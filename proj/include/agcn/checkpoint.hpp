#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "agcn/backbone.hpp"
#include "agcn/graph.hpp"
#include "agcn/matrix.hpp"

namespace agcn::checkpoint {

inline constexpr const char* kFormat = "agcn-checkpoint";
inline constexpr int kVersion = 1;

/// Named tensors plus named scalars. Serialised as JSON with a versioned header;
/// each tensor carries its shape and row-major float64 data, written with
/// round-trip precision so decode(encode(x)) == x bit for bit.
struct Bundle {
  std::map<std::string, numerics::Matrix> tensors;
  std::map<std::string, double> scalars;

  const numerics::Matrix& tensor(const std::string& name) const;
  double scalar(const std::string& name) const;

  friend bool operator==(const Bundle&, const Bundle&) = default;
};

std::string encode(const Bundle& bundle);
/// Throws DataError for a wrong format tag, unsupported version or bad shapes.
Bundle decode(const std::string& text);

void save(const std::filesystem::path& path, const Bundle& bundle);
Bundle load(const std::filesystem::path& path);

void put(Bundle& out, const std::string& prefix, const backbone::Backbone& b);
void put(Bundle& out, const std::string& prefix, const graph::GraphModel& g);
backbone::Backbone get_backbone(const Bundle& in, const std::string& prefix);
graph::GraphModel get_graph(const Bundle& in, const std::string& prefix);

}  // namespace agcn::checkpoint
