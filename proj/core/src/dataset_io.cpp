// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "roclab/digest.hpp"
#include "roclab/errors.hpp"
#include "roclab/synth.hpp"

namespace roclab {

namespace {

using nlohmann::json;

void append_examples(const std::vector<PairedExample>& v, std::string& rasters,
                     std::string& captions) {
  auto put = [](std::string& buf, const void* p, std::size_t n) {
    buf.append(static_cast<const char*>(p), n);
  };
  for (const PairedExample& ex : v) {
    put(rasters, ex.image.data(), ex.image.size() * sizeof(double));
    const std::uint64_t id = ex.id;
    const std::uint32_t cls = static_cast<std::uint32_t>(ex.true_class);
    const std::uint32_t prov = static_cast<std::uint32_t>(ex.provenance);
    const std::uint32_t len = static_cast<std::uint32_t>(ex.caption.size());
    put(captions, &id, sizeof(id));
    put(captions, &cls, sizeof(cls));
    put(captions, &prov, sizeof(prov));
    put(captions, &len, sizeof(len));
    put(captions, ex.caption.data(), ex.caption.size() * sizeof(std::uint32_t));
  }
}

void read_examples(std::vector<PairedExample>& out, std::size_t count,
                   std::size_t pixels, const std::string& rasters,
                   std::size_t& roff, const std::string& captions,
                   std::size_t& coff) {
  auto take = [](const std::string& buf, std::size_t& off, void* p,
                 std::size_t n) {
    if (off + n > buf.size()) throw IoError("dataset: truncated block");
    std::memcpy(p, buf.data() + off, n);
    off += n;
  };
  for (std::size_t i = 0; i < count; ++i) {
    PairedExample ex;
    ex.image.resize(pixels);
    take(rasters, roff, ex.image.data(), pixels * sizeof(double));
    std::uint64_t id;
    std::uint32_t cls, prov, len;
    take(captions, coff, &id, sizeof(id));
    take(captions, coff, &cls, sizeof(cls));
    take(captions, coff, &prov, sizeof(prov));
    take(captions, coff, &len, sizeof(len));
    ex.id = id;
    ex.true_class = cls;
    ex.provenance = static_cast<Provenance>(prov);
    ex.caption.resize(len);
    take(captions, coff, ex.caption.data(), len * sizeof(std::uint32_t));
    out.push_back(std::move(ex));
  }
}

void blocks_for(const Dataset& ds, std::string& rasters, std::string& captions) {
  append_examples(ds.train, rasters, captions);
  append_examples(ds.eval_images, rasters, captions);
  append_examples(ds.target_pool, rasters, captions);
}

void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("dataset: cannot open " + p.string());
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("dataset: write failed for " + p.string());
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("dataset: cannot open " + p.string());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

std::string dataset_digest(const Dataset& ds) {
  std::string rasters, captions;
  blocks_for(ds, rasters, captions);
  Sha256 h;
  h.update(rasters.data(), rasters.size());
  h.update(captions.data(), captions.size());
  return h.hex_final();
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);

  std::string rasters, captions;
  blocks_for(ds, rasters, captions);
  Sha256 h;
  h.update(rasters.data(), rasters.size());
  h.update(captions.data(), captions.size());
  const std::string digest = h.hex_final();

  const Taxonomy& tax = ds.taxonomy;
  json manifest = {
      {"format_version", 1},
      {"seed", ds.seed},
      {"next_id", ds.next_id},
      {"digest", digest},
      {"config_digest", ds.config_digest},
      {"counts",
       {{"train", ds.train.size()},
        {"eval", ds.eval_images.size()},
        {"targets", ds.target_pool.size()}}},
      {"taxonomy",
       {{"image_h", tax.image_h},
        {"image_w", tax.image_w},
        {"classes", tax.classes},
        {"filler_vocab_size", tax.filler_vocab_size},
        {"tokens_per_class", tax.tokens_per_class},
        {"separation_margin", tax.separation_margin},
        {"noise_sigma", tax.noise_sigma},
        {"deform_amplitude", tax.deform_amplitude},
        {"prototypes", tax.prototypes}}},
  };

  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
  write_file(fs::path(dir) / "images.bin", rasters);
  write_file(fs::path(dir) / "captions.bin", captions);
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  json manifest;
  try {
    manifest = json::parse(read_file(fs::path(dir) / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset: bad manifest: ") + e.what());
  }

  Dataset ds;
  const json& jt = manifest.at("taxonomy");
  Taxonomy& tax = ds.taxonomy;
  tax.image_h = jt.at("image_h").get<std::size_t>();
  tax.image_w = jt.at("image_w").get<std::size_t>();
  tax.classes = jt.at("classes").get<std::vector<std::string>>();
  tax.filler_vocab_size = jt.at("filler_vocab_size").get<std::size_t>();
  tax.tokens_per_class = jt.at("tokens_per_class").get<std::size_t>();
  tax.separation_margin = jt.at("separation_margin").get<double>();
  tax.noise_sigma = jt.at("noise_sigma").get<double>();
  tax.deform_amplitude = jt.at("deform_amplitude").get<double>();
  tax.prototypes = jt.at("prototypes").get<std::vector<Image>>();
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.next_id = manifest.at("next_id").get<std::uint64_t>();
  ds.config_digest = manifest.value("config_digest", std::string());

  const std::string rasters = read_file(fs::path(dir) / "images.bin");
  const std::string captions = read_file(fs::path(dir) / "captions.bin");

  std::size_t roff = 0, coff = 0;
  const std::size_t pixels = tax.image_h * tax.image_w;
  read_examples(ds.train, manifest.at("counts").at("train").get<std::size_t>(),
                pixels, rasters, roff, captions, coff);
  read_examples(ds.eval_images,
                manifest.at("counts").at("eval").get<std::size_t>(), pixels,
                rasters, roff, captions, coff);
  read_examples(ds.target_pool,
                manifest.at("counts").at("targets").get<std::size_t>(), pixels,
                rasters, roff, captions, coff);

  Sha256 h;
  h.update(rasters.data(), rasters.size());
  h.update(captions.data(), captions.size());
  if (h.hex_final() != manifest.at("digest").get<std::string>()) {
    throw CorruptChecksum("dataset: block digest mismatch");
  }
  return ds;
}

}  // namespace roclab
