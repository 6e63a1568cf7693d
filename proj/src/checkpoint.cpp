#include "agcn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agcn/errors.hpp"

namespace agcn::checkpoint {

using numerics::Matrix;

const Matrix& Bundle::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

double Bundle::scalar(const std::string& name) const {
  auto it = scalars.find(name);
  if (it == scalars.end()) throw DataError("checkpoint: missing scalar '" + name + "'");
  return it->second;
}

std::string encode(const Bundle& bundle) {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  nlohmann::ordered_json scalars = nlohmann::ordered_json::object();
  for (const auto& [name, v] : bundle.scalars) scalars[name] = v;
  j["scalars"] = scalars;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto& [name, m] : bundle.tensors) {
    tensors[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
  }
  j["tensors"] = tensors;
  return j.dump();
}

Bundle decode(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw DataError("checkpoint: unknown format");
    const int version = j.at("version").get<int>();
    if (version != kVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    Bundle b;
    for (const auto& [name, v] : j.at("scalars").items()) b.scalars[name] = v.get<double>();
    for (const auto& [name, t] : j.at("tensors").items()) {
      b.tensors.emplace(name, Matrix(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                                     t.at("data").get<std::vector<double>>()));
    }
    return b;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("checkpoint: ") + ex.what());
  } catch (const ShapeError& ex) {
    throw DataError(std::string("checkpoint: ") + ex.what());
  }
}

void save(const std::filesystem::path& path, const Bundle& bundle) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << encode(bundle) << '\n';
}

Bundle load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

void put(Bundle& out, const std::string& prefix, const backbone::Backbone& b) {
  out.tensors[prefix + ".w1"] = b.w1;
  out.tensors[prefix + ".b1"] = b.b1;
  out.tensors[prefix + ".w2"] = b.w2;
  out.tensors[prefix + ".b2"] = b.b2;
  out.scalars[prefix + ".negative_slope"] = b.act.negative_slope;
}

void put(Bundle& out, const std::string& prefix, const graph::GraphModel& g) {
  out.tensors[prefix + ".w1"] = g.w1;
  out.tensors[prefix + ".w2"] = g.w2;
  out.scalars[prefix + ".negative_slope"] = g.act.negative_slope;
}

backbone::Backbone get_backbone(const Bundle& in, const std::string& prefix) {
  backbone::Backbone b;
  b.w1 = in.tensor(prefix + ".w1");
  b.b1 = in.tensor(prefix + ".b1");
  b.w2 = in.tensor(prefix + ".w2");
  b.b2 = in.tensor(prefix + ".b2");
  b.act.negative_slope = in.scalar(prefix + ".negative_slope");
  if (b.b1.rows() != 1 || b.b1.cols() != b.w1.cols() || b.w2.rows() != b.w1.cols() ||
      b.b2.rows() != 1 || b.b2.cols() != b.w2.cols()) {
    throw DataError("checkpoint: inconsistent backbone shapes under '" + prefix + "'");
  }
  return b;
}

graph::GraphModel get_graph(const Bundle& in, const std::string& prefix) {
  graph::GraphModel g;
  g.w1 = in.tensor(prefix + ".w1");
  g.w2 = in.tensor(prefix + ".w2");
  g.act.negative_slope = in.scalar(prefix + ".negative_slope");
  if (g.w2.rows() != g.w1.cols()) {
    throw DataError("checkpoint: inconsistent graph shapes under '" + prefix + "'");
  }
  return g;
}

}  // namespace agcn::checkpoint
