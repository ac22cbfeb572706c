#include "mpf/backbone/checkpoint.hpp"

#include <chrono>
#include <fstream>

#include "json.hpp"
#include "mpf/core/tensor_io.hpp"

namespace mpf::backbone {

using nlohmann::json;

const char* output_mode_name(OutputMode m) {
  return m == OutputMode::embedding ? "embedding" : "feature_map";
}

OutputMode output_mode_from_name(const std::string& s) {
  if (s == "embedding") return OutputMode::embedding;
  if (s == "feature_map") return OutputMode::feature_map;
  fail("unknown output mode: " + s);
}

const char* init_scheme_name(InitScheme s) {
  return s == InitScheme::fan_in_scaled ? "fan_in_scaled" : "unit_normal";
}

InitScheme init_scheme_from_name(const std::string& s) {
  if (s == "fan_in_scaled") return InitScheme::fan_in_scaled;
  if (s == "unit_normal") return InitScheme::unit_normal;
  fail("unknown init scheme: " + s);
}

namespace {

json spec_to_json(const InceptionSpec& s) {
  return json{{"b1", s.b1},         {"b2_reduce", s.b2_reduce}, {"b2", s.b2},
              {"b3_reduce", s.b3_reduce}, {"b3", s.b3},         {"b4", s.b4}};
}

InceptionSpec spec_from_json(const json& j) {
  return {j.at("b1").get<int>(), j.at("b2_reduce").get<int>(), j.at("b2").get<int>(),
          j.at("b3_reduce").get<int>(), j.at("b3").get<int>(), j.at("b4").get<int>()};
}

json config_json(const BackboneConfig& c) {
  return json{{"in_channels", c.in_channels},
              {"stem_channels", c.stem_channels},
              {"inception_a", spec_to_json(c.inception_a)},
              {"inception_b", spec_to_json(c.inception_b)},
              {"ca_reduction", c.ca_reduction},
              {"embedding_dim", c.embedding_dim},
              {"input_t", c.input_t},
              {"input_h", c.input_h},
              {"input_w", c.input_w},
              {"output_mode", output_mode_name(c.output_mode)},
              {"init_scheme", init_scheme_name(c.init_scheme)},
              {"seed", c.seed}};
}

BackboneConfig config_from(const json& j) {
  BackboneConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.stem_channels = j.at("stem_channels").get<int>();
  c.inception_a = spec_from_json(j.at("inception_a"));
  c.inception_b = spec_from_json(j.at("inception_b"));
  c.ca_reduction = j.at("ca_reduction").get<int>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.input_t = j.at("input_t").get<int>();
  c.input_h = j.at("input_h").get<int>();
  c.input_w = j.at("input_w").get<int>();
  c.output_mode = output_mode_from_name(j.at("output_mode").get<std::string>());
  c.init_scheme = init_scheme_from_name(j.at("init_scheme").get<std::string>());
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

}  // namespace

std::string config_to_json(const BackboneConfig& cfg) { return config_json(cfg).dump(); }

BackboneConfig config_from_json(const std::string& text) {
  return config_from(json::parse(text));
}

void save_checkpoint(const Backbone<float>& net, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "params", ec);
  check(std::filesystem::is_directory(dir / "params"),
        "save_checkpoint: cannot create " + dir.string());

  json meta;
  meta["schema"] = "mpf-checkpoint-1";
  meta["config"] = config_json(net.cfg);
  meta["provenance"] = net.provenance;
  meta["seed"] = net.cfg.seed;
  meta["created_utc"] = static_cast<int64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  meta["training"] =
      net.training_meta.empty() ? json::object() : json::parse(net.training_meta);
  std::ofstream os(dir / "meta.json");
  check(os.good(), "save_checkpoint: cannot write meta.json under " + dir.string());
  os << meta.dump(2) << "\n";

  for (const auto& name : net.params.names())
    write_tensor(net.params.at(name), dir / "params" / (name + ".mef"));
}

Backbone<float> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "meta.json");
  check(is.good(), "load_checkpoint: missing meta.json in " + dir.string());
  json meta = json::parse(is);
  check(meta.at("schema").get<std::string>() == "mpf-checkpoint-1",
        "load_checkpoint: unsupported schema in " + dir.string());

  Backbone<float> net = Backbone<float>::build(config_from(meta.at("config")));
  net.provenance = meta.at("provenance").get<std::string>();
  net.training_meta = meta.at("training").dump();
  for (const auto& name : net.params.names()) {
    TensorF t = read_tensor(dir / "params" / (name + ".mef"));
    auto& dst = net.params.at(name);
    check(t.dims() == dst.dims(), "load_checkpoint: shape mismatch for param " + name);
    dst = std::move(t);
  }
  return net;
}

}  // namespace mpf::backbone
