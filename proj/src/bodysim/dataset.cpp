#include "immf/bodysim/dataset.hpp"

#include <algorithm>

#include "immf/bodysim/pose.hpp"
#include "immf/bodysim/radar.hpp"
#include "immf/bodysim/render.hpp"
#include "immf/common/error.hpp"
#include "immf/common/io.hpp"

namespace immf::bodysim {

namespace {

constexpr std::uint64_t kPoseStream = 0x706f7365;  // "pose"

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

struct Field {
  const char* name;
  std::vector<float> Frame::*member;
  std::size_t per_frame;
};

std::vector<Field> fields(const ScaleConfig& s) {
  return {{"points", &Frame::points, kNumPoints * 3},
          {"image", &Frame::image, 3 * s.image_size * s.image_size},
          {"joints", &Frame::joints, kNumJoints * 3},
          {"verts", &Frame::verts_full, s.verts_full * 3},
          {"verts_coarse", &Frame::verts_coarse, s.verts_coarse * 3},
          {"pose", &Frame::pose, kPoseDim}};
}

}  // namespace

std::vector<Frame> generate_frames(const BodyTemplate& tpl, const GenerateOptions& opts) {
  opts.profile.validate();
  if (opts.frames_per_sequence == 0) throw ValidationError("frames_per_sequence must be positive");
  const std::size_t n = tpl.scale.image_size;
  const std::uint64_t scene_key = fnv1a(opts.profile.name);
  std::vector<Frame> frames;
  frames.reserve(opts.count);

  Rng pose_rng;
  MotionState motion;
  for (std::size_t i = 0; i < opts.count; ++i) {
    if (i % opts.frames_per_sequence == 0) {
      pose_rng = Rng(derive_seed(opts.seed, kPoseStream, i / opts.frames_per_sequence));
      motion = MotionState::random(pose_rng, opts.motion_amplitude);
    }
    const Pose pose = sample_pose(pose_rng, motion);
    auto skinned = skin(tpl, pose);

    Frame f;
    f.scene = opts.profile.name;
    f.seed = derive_seed(opts.seed, scene_key, i);
    Rng rng(f.seed);
    const Occluder occ = draw_occluder(opts.profile, rng, n);
    f.image = render_image(tpl, skinned.verts, n, opts.profile, occ, rng);
    f.points = sample_radar(tpl, skinned.verts, opts.profile, opts.sensor, occ, n, rng);
    f.verts_coarse = tpl.to_coarse(skinned.verts);
    f.joints = std::move(skinned.joints);
    f.verts_full = std::move(skinned.verts);
    f.pose = pose.to_params();
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  const std::size_t count = data.frames.size();
  nlohmann::json manifest = {{"format", kDatasetMagic},
                             {"version", kDatasetVersion},
                             {"byte_order", "little"},
                             {"scale",
                              {{"name", data.scale.name},
                               {"verts_full", data.scale.verts_full},
                               {"verts_coarse", data.scale.verts_coarse},
                               {"image_size", data.scale.image_size},
                               {"feature_dim", data.scale.feature_dim}}},
                             {"frames", count}};
  nlohmann::json tags = nlohmann::json::array(), seeds = nlohmann::json::array();
  for (const auto& f : data.frames) {
    tags.push_back(f.scene);
    seeds.push_back(f.seed);
  }
  manifest["scene_tags"] = tags;
  manifest["seeds"] = seeds;

  for (const auto& field : fields(data.scale)) {
    std::vector<float> blob;
    blob.reserve(count * field.per_frame);
    for (const auto& f : data.frames) {
      const auto& v = f.*field.member;
      if (v.size() != field.per_frame)
        throw ShapeError(std::string("dataset field '") + field.name + "' has " +
                         std::to_string(v.size()) + " values, expected " +
                         std::to_string(field.per_frame));
      blob.insert(blob.end(), v.begin(), v.end());
    }
    const std::string file = std::string(field.name) + ".f32";
    io::write_f32(dir / file, blob);
    manifest["fields"][field.name] = {{"file", file}, {"dtype", "float32"},
                                      {"per_frame", field.per_frame}};
  }
  io::write_json(dir / "manifest.json", manifest);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "manifest.json");
  try {
    if (!manifest.is_object() || manifest.value("format", "") != kDatasetMagic)
      throw FormatError(dir.string() + ": not a dataset (bad magic)");
    const int version = manifest.at("version").get<int>();
    if (version != kDatasetVersion)
      throw FormatError(dir.string() + ": dataset version " + std::to_string(version) +
                        " unsupported (expected " + std::to_string(kDatasetVersion) + ")");
    Dataset data;
    const auto& s = manifest.at("scale");
    data.scale = {s.at("name").get<std::string>(), s.at("verts_full").get<std::size_t>(),
                  s.at("verts_coarse").get<std::size_t>(), s.at("image_size").get<std::size_t>(),
                  s.at("feature_dim").get<std::size_t>()};
    const auto count = manifest.at("frames").get<std::size_t>();
    const auto& tags = manifest.at("scene_tags");
    const auto& seeds = manifest.at("seeds");
    if (tags.size() != count || seeds.size() != count)
      throw FormatError(dir.string() + ": manifest frame count disagrees with tags/seeds");
    data.frames.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      data.frames[i].scene = tags[i].get<std::string>();
      data.frames[i].seed = seeds[i].get<std::uint64_t>();
    }
    for (const auto& field : fields(data.scale)) {
      const auto& entry = manifest.at("fields").at(field.name);
      if (entry.at("per_frame").get<std::size_t>() != field.per_frame)
        throw FormatError(dir.string() + ": field '" + field.name + "' has unexpected shape");
      const auto blob =
          io::read_f32(dir / entry.at("file").get<std::string>(), count * field.per_frame);
      for (std::size_t i = 0; i < count; ++i) {
        auto first = blob.begin() + static_cast<std::ptrdiff_t>(i * field.per_frame);
        data.frames[i].*field.member =
            std::vector<float>(first, first + static_cast<std::ptrdiff_t>(field.per_frame));
      }
    }
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace immf::bodysim
