#include "ocs/cogmap.hpp"

#include <json.hpp>

#include <fstream>

namespace ocs {

namespace {

using nlohmann::json;

constexpr int kMapVersion = 1;

}  // namespace

void save_map(const CognitiveMap& map, const std::filesystem::path& path) {
  json j;
  j["version"] = kMapVersion;
  j["layout_tile_size"] = map.layout_tile_size;
  j["in_view_margin"] = map.in_view_margin;
  j["next_id"] = map.next_id();
  json entries = json::array();
  for (const auto& e : map.entries()) {
    json je;
    je["id"] = e.id;
    je["kind"] = e.kind == EntryKind::layout ? "layout" : "object";
    je["params"] = e.params.flat_values();
    je["last_update_step"] = e.last_update_step;
    if (e.kind == EntryKind::layout) je["tile"] = json::array({e.tile_ix, e.tile_iz});
    if (!e.decoder_ref.empty()) je["decoder_ref"] = e.decoder_ref;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write map " + path.string());
  f << j.dump(2) << "\n";
}

CognitiveMap load_map(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read map " + path.string());
  json j = json::parse(f);
  if (j.at("version").get<int>() != kMapVersion)
    throw std::runtime_error("unsupported map version in " + path.string());
  CognitiveMap map;
  map.layout_tile_size = j.at("layout_tile_size");
  map.in_view_margin = j.at("in_view_margin");
  for (const auto& je : j.at("entries")) {
    MapEntry e;
    e.id = je.at("id");
    e.kind = je.at("kind") == "layout" ? EntryKind::layout : EntryKind::object;
    e.params = LatentParams::from_flat_values(je.at("params").get<std::vector<double>>());
    e.last_update_step = je.at("last_update_step");
    if (je.contains("tile")) {
      e.tile_ix = je.at("tile").at(0);
      e.tile_iz = je.at("tile").at(1);
    }
    if (je.contains("decoder_ref")) e.decoder_ref = je.at("decoder_ref");
    map.entries().push_back(std::move(e));
  }
  map.set_next_id(j.at("next_id"));
  return map;
}

}  // namespace ocs
