#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylo/model.hpp"

namespace stylo {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"mode", c.mode == FeatureMode::syntactic ? "syntactic" : "lexical"},
      {"encoder", c.encoder == EncoderKind::cnn ? "cnn" : "lstm"},
      {"M", c.M},
      {"N", c.N},
      {"d_p", c.d_p},
      {"d_l", c.d_l},
      {"filters_per_width", c.filters_per_width},
      {"windows", c.windows},
      {"cnn_layers", c.cnn_layers},
      {"attention_width", c.attention_width},
      {"classes", c.classes},
      {"word_vocab", c.word_vocab},
      {"word_dim", c.word_dim},
      {"finetune_embeddings", c.finetune_embeddings},
  };
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.mode = j.at("mode") == "syntactic" ? FeatureMode::syntactic : FeatureMode::lexical;
  c.encoder = j.at("encoder") == "cnn" ? EncoderKind::cnn : EncoderKind::lstm;
  c.M = j.at("M");
  c.N = j.at("N");
  c.d_p = j.at("d_p");
  c.d_l = j.at("d_l");
  c.filters_per_width = j.at("filters_per_width");
  c.windows = j.at("windows").get<std::vector<int>>();
  c.cnn_layers = j.at("cnn_layers");
  c.attention_width = j.at("attention_width");
  c.classes = j.at("classes");
  c.word_vocab = j.at("word_vocab");
  c.word_dim = j.at("word_dim");
  c.finetune_embeddings = j.at("finetune_embeddings");
  return c;
}

// Checkpoint layout: "STMOD1\n", one-line JSON header, "\n", then raw
// little-endian float32 parameter blocks in visit_all_blocks order.
template <class T>
void save_model(SyntacticModel<T>& model, const std::string& path,
                const nlohmann::json& extra_header = nlohmann::json::object()) {
  nlohmann::json header;
  header["config"] = config_to_json(model.cfg);
  header["tagset_hash"] = tagset().hash();
  header["rng_algorithm"] = Rng::algorithm();
  nlohmann::json blocks = nlohmann::json::array();
  model.visit_all_blocks([&](Param<T>& p) {
    blocks.push_back({{"name", p.name}, {"rows", p.v.rows}, {"cols", p.v.cols}});
  });
  header["blocks"] = std::move(blocks);
  for (auto& [k, v] : extra_header.items()) header[k] = v;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "STMOD1\n" << header.dump() << "\n";
  model.visit_all_blocks([&](Param<T>& p) {
    std::vector<float> buf(p.v.data.begin(), p.v.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  });
}

template <class T>
SyntacticModel<T> load_model(const std::string& path, nlohmann::json* header_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "STMOD1") throw std::runtime_error("bad checkpoint magic in " + path);
  std::string header_line;
  std::getline(in, header_line);
  const nlohmann::json header = nlohmann::json::parse(header_line);
  if (header.at("tagset_hash").get<std::uint64_t>() != tagset().hash())
    throw std::runtime_error("checkpoint tag set does not match this build");

  SyntacticModel<T> model(config_from_json(header.at("config")));
  std::size_t bi = 0;
  const auto& blocks = header.at("blocks");
  model.visit_all_blocks([&](Param<T>& p) {
    const auto& b = blocks.at(bi++);
    if (b.at("name") != p.name || b.at("rows") != p.v.rows || b.at("cols") != p.v.cols)
      throw std::runtime_error("checkpoint block mismatch at " + p.name);
    std::vector<float> buf(p.v.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) p.v.data[i] = static_cast<T>(buf[i]);
  });
  if (header_out) *header_out = header;
  return model;
}

}  // namespace stylo
