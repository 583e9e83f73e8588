#include "sifa/config_io.hpp"

#include <set>

namespace sifa {

using json = nlohmann::json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// that typos surface as errors instead of silently falling back to defaults.
class Fields {
 public:
  Fields(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    require(j.is_object(), ErrorKind::InvalidArgument, context_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::InvalidArgument, context_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void done() const {
    for (const auto& [k, v] : j_.items()) {
      require(seen_.count(k) > 0, ErrorKind::InvalidArgument, "unknown key '" + k + "' in " + context_);
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const ArchConfig& c) {
  return {{"encoder_channels", c.encoder_channels},
          {"max_encoder_channels", c.max_encoder_channels},
          {"generator_channels", c.generator_channels},
          {"discriminator_channels", c.discriminator_channels},
          {"input_resolution", c.input_resolution},
          {"num_classes", c.num_classes}};
}

ArchConfig arch_from_json(const json& j, ArchConfig c) {
  Fields f(j, "arch");
  if (const auto* preset = f.sub("preset")) {
    const auto name = preset->get<std::string>();
    if (name == "paper") {
      c = ArchConfig::paper(c.num_classes);
    } else if (name == "desk") {
      c = ArchConfig::desk(c.input_resolution, c.num_classes);
    } else {
      fail(ErrorKind::InvalidArgument, "unknown arch preset '" + name + "'");
    }
  }
  f.get("encoder_channels", c.encoder_channels);
  f.get("max_encoder_channels", c.max_encoder_channels);
  f.get("generator_channels", c.generator_channels);
  f.get("discriminator_channels", c.discriminator_channels);
  f.get("input_resolution", c.input_resolution);
  f.get("num_classes", c.num_classes);
  f.done();
  c.validate();
  return c;
}

json to_json(const LossWeights& w) {
  return {{"adv_t", w.adv_t},   {"adv_s", w.adv_s},   {"cyc", w.cyc},       {"seg_1", w.seg_1},
          {"seg_2", w.seg_2},   {"adv_p1", w.adv_p1}, {"adv_p2", w.adv_p2}, {"adv_s_tilde", w.adv_s_tilde}};
}

LossWeights loss_weights_from_json(const json& j, LossWeights w) {
  Fields f(j, "loss_weights");
  f.get("adv_t", w.adv_t);
  f.get("adv_s", w.adv_s);
  f.get("cyc", w.cyc);
  f.get("seg_1", w.seg_1);
  f.get("seg_2", w.seg_2);
  f.get("adv_p1", w.adv_p1);
  f.get("adv_p2", w.adv_p2);
  f.get("adv_s_tilde", w.adv_s_tilde);
  f.done();
  w.validate();
  return w;
}

json to_json(const AugmentConfig& c) {
  return {{"enabled", c.enabled},
          {"rotation_range_deg", c.rotation_range_deg},
          {"scale_min", c.scale_min},
          {"scale_max", c.scale_max},
          {"shear_range", c.shear_range}};
}

AugmentConfig augment_from_json(const json& j, AugmentConfig c) {
  Fields f(j, "augmentation");
  f.get("enabled", c.enabled);
  f.get("rotation_range_deg", c.rotation_range_deg);
  f.get("scale_min", c.scale_min);
  f.get("scale_max", c.scale_max);
  f.get("shear_range", c.shear_range);
  f.done();
  c.validate();
  return c;
}

namespace {

std::string_view roi_name(RoiKind k) {
  switch (k) {
    case RoiKind::none: return "none";
    case RoiKind::fixed_box: return "fixed_box";
    case RoiKind::label_bounding_slices: return "label_bounding_slices";
  }
  return "none";
}

RoiKind roi_from_string(std::string_view s) {
  if (s == "none") return RoiKind::none;
  if (s == "fixed_box") return RoiKind::fixed_box;
  if (s == "label_bounding_slices") return RoiKind::label_bounding_slices;
  fail(ErrorKind::InvalidArgument, "unknown roi kind '" + std::string(s) + "'");
}

}  // namespace

json to_json(const PreprocessConfig& c) {
  json j = {{"roi", roi_name(c.roi)},
            {"target_resolution", c.target_resolution},
            {"slicing_axis", to_string(c.slicing_axis)}};
  if (c.roi == RoiKind::fixed_box) j["box"] = {{"center", c.box.center}, {"size", c.box.size}};
  return j;
}

PreprocessConfig preprocess_from_json(const json& j, PreprocessConfig c) {
  Fields f(j, "preprocess");
  std::string roi(roi_name(c.roi));
  f.get("roi", roi);
  c.roi = roi_from_string(roi);
  if (const auto* box = f.sub("box")) {
    Fields b(*box, "preprocess.box");
    b.get("center", c.box.center);
    b.get("size", c.box.size);
    b.done();
  }
  f.get("target_resolution", c.target_resolution);
  std::string axis(to_string(c.slicing_axis));
  f.get("slicing_axis", axis);
  c.slicing_axis = slicing_axis_from_string(axis);
  f.done();
  c.validate();
  return c;
}

json to_json(const SyntheticConfig& c) {
  json steps = json::array();
  for (const auto& s : c.target_transform) steps.push_back({{"kind", to_string(s.kind)}, {"param", s.param}});
  return {{"image_size", c.image_size},
          {"num_slices", c.num_slices},
          {"num_subjects_per_domain", c.num_subjects_per_domain},
          {"num_shapes", c.num_shapes},
          {"texture_noise", c.texture_noise},
          {"spacing", c.spacing},
          {"target_transform", steps},
          {"seed", c.seed}};
}

SyntheticConfig synthetic_from_json(const json& j, SyntheticConfig c) {
  Fields f(j, "synthetic");
  f.get("image_size", c.image_size);
  f.get("num_slices", c.num_slices);
  f.get("num_subjects_per_domain", c.num_subjects_per_domain);
  f.get("num_shapes", c.num_shapes);
  f.get("texture_noise", c.texture_noise);
  f.get("spacing", c.spacing);
  f.get("seed", c.seed);
  if (const auto* steps = f.sub("target_transform")) {
    require(steps->is_array(), ErrorKind::InvalidArgument, "synthetic.target_transform must be an array");
    c.target_transform.clear();
    for (const auto& s : *steps) {
      Fields sf(s, "synthetic.target_transform[]");
      std::string kind;
      ShiftStep step;
      sf.get("kind", kind);
      sf.get("param", step.param);
      sf.done();
      step.kind = shift_kind_from_string(kind);
      c.target_transform.push_back(step);
    }
  }
  f.done();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  json j = {{"iterations", c.iterations},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"loss_weights", to_json(c.loss_weights)},
            {"gan_loss_form", to_string(c.gan_loss_form)},
            {"checkpoint_every", c.checkpoint_every},
            {"seed", c.seed},
            {"image_pool_size", c.image_pool_size},
            {"output_dir", c.output_dir.string()}};
  j["augmentation"] = c.augmentation ? to_json(*c.augmentation) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  Fields f(j, "train");
  f.get("iterations", c.iterations);
  f.get("batch_size", c.batch_size);
  f.get("learning_rate", c.learning_rate);
  if (const auto* w = f.sub("loss_weights")) c.loss_weights = loss_weights_from_json(*w, c.loss_weights);
  std::string form(to_string(c.gan_loss_form));
  f.get("gan_loss_form", form);
  c.gan_loss_form = gan_loss_form_from_string(form);
  f.get("checkpoint_every", c.checkpoint_every);
  f.get("seed", c.seed);
  f.get("image_pool_size", c.image_pool_size);
  std::string out = c.output_dir.string();
  f.get("output_dir", out);
  c.output_dir = out;
  if (const auto* a = f.sub("augmentation")) {
    if (a->is_null()) {
      c.augmentation.reset();
    } else {
      c.augmentation = augment_from_json(*a, c.augmentation.value_or(AugmentConfig{}));
    }
  }
  f.done();
  c.validate();
  return c;
}

json to_json(const LossRecord& r) {
  json j = {{"iteration", r.iteration}, {"wall_clock_s", r.wall_clock_s}};
  for (int t = 0; t < kNumLossTerms; ++t) {
    if (r.values[t]) j[std::string(to_string(static_cast<LossTerm>(t)))] = *r.values[t];
  }
  return j;
}

LossRecord loss_record_from_json(const json& j) {
  require(j.is_object(), ErrorKind::InvalidArgument, "loss record must be a JSON object");
  LossRecord r;
  try {
    r.iteration = j.at("iteration").get<std::int64_t>();
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    for (const auto& [k, v] : j.items()) {
      if (k == "iteration" || k == "wall_clock_s") continue;
      const auto term = loss_term_from_string(k);
      require(term.has_value(), ErrorKind::InvalidArgument, "unknown loss term '" + k + "'");
      r.set(*term, v.get<double>());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed loss record: ") + e.what());
  }
  return r;
}

}  // namespace sifa
