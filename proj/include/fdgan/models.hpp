#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fdgan/nn.hpp"
#include "fdgan/pose.hpp"

namespace fdgan::models {

using nn::BnMode;
using nn::BufferRef;
using nn::ForwardCtx;
using nn::ParamRef;

enum class Preset { desk, full };

inline std::string preset_name(Preset p) { return p == Preset::desk ? "desk" : "full"; }
inline Preset preset_from_name(const std::string& s) {
  if (s == "desk") return Preset::desk;
  if (s == "full") return Preset::full;
  throw config_error("unknown model preset: " + s);
}

/// Widths and switches for the five network blocks. The desk preset keeps the
/// full architecture's scale factors (5 downsampling stages, 5 upsampling
/// stages, x32 spatial seed) while training in minutes.
struct ModelConfig {
  Preset preset = Preset::desk;
  Index embed_dim = 128;      // 2048 at full scale
  Index pose_feat_dim = 32;   // 128 at full scale
  Index noise_dim = 64;       // 256 at full scale
  Index height = 64;          // 256 at full scale
  Index width = 32;           // 128 at full scale
  double dropout = 0.5;
  bool share_encoder_with_did = false;
  bool single_branch_classifier = false;
  Index n_identities = 0;  // used only by the single-branch classifier head

  static ModelConfig desk() { return ModelConfig{}; }
  static ModelConfig full() {
    ModelConfig c;
    c.preset = Preset::full;
    c.embed_dim = 2048;
    c.pose_feat_dim = 128;
    c.noise_dim = 256;
    c.height = 256;
    c.width = 128;
    return c;
  }

  void validate() const {
    require(embed_dim >= 1 && pose_feat_dim >= 1 && noise_dim >= 1,
            "model config: dims must be >= 1");
    require(height % 32 == 0 && width % 32 == 0,
            "model config: image size must be divisible by 32 for the x32 "
            "upsampling chain");
    require(dropout >= 0 && dropout < 1, "model config: dropout in [0,1)");
    if (single_branch_classifier)
      require(n_identities >= 1,
              "model config: single-branch classifier needs n_identities");
  }
};

namespace detail {

template <typename S>
struct ConvBnRelu {
  nn::Conv2d<S> conv;
  nn::BatchNorm<S> bn;

  ConvBnRelu() = default;
  ConvBnRelu(Rng& rng, Index in_c, Index out_c, Index k, Index stride, Index pad)
      : conv(rng, in_c, out_c, k, stride, pad), bn(out_c) {}

  Var<S> forward(const Var<S>& x, const ForwardCtx<S>& ctx) {
    return relu(bn.forward(conv.forward(x), ctx.bn));
  }
  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    conv.collect(p + ".conv", out);
    bn.collect(p + ".bn", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    bn.collect_buffers(p + ".bn", out);
  }
};

/// conv1x1 -> conv3x3(stride) -> conv1x1 with projection skip when needed.
template <typename S>
struct Bottleneck {
  nn::Conv2d<S> c1, c2, c3;
  nn::BatchNorm<S> b1, b2, b3;
  bool project = false;
  nn::Conv2d<S> cp;
  nn::BatchNorm<S> bp;

  Bottleneck() = default;
  Bottleneck(Rng& rng, Index in_c, Index mid_c, Index out_c, Index stride)
      : c1(rng, in_c, mid_c, 1, 1, 0),
        c2(rng, mid_c, mid_c, 3, stride, 1),
        c3(rng, mid_c, out_c, 1, 1, 0),
        b1(mid_c),
        b2(mid_c),
        b3(out_c),
        project(stride != 1 || in_c != out_c) {
    if (project) {
      cp = nn::Conv2d<S>(rng, in_c, out_c, 1, stride, 0);
      bp = nn::BatchNorm<S>(out_c);
    }
  }

  Var<S> forward(const Var<S>& x, const ForwardCtx<S>& ctx) {
    Var<S> y = relu(b1.forward(c1.forward(x), ctx.bn));
    y = relu(b2.forward(c2.forward(y), ctx.bn));
    y = b3.forward(c3.forward(y), ctx.bn);
    Var<S> skip = project ? bp.forward(cp.forward(x), ctx.bn) : x;
    return relu(add(y, skip));
  }
  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    c1.collect(p + ".c1", out);
    b1.collect(p + ".b1", out);
    c2.collect(p + ".c2", out);
    b2.collect(p + ".b2", out);
    c3.collect(p + ".c3", out);
    b3.collect(p + ".b3", out);
    if (project) {
      cp.collect(p + ".cp", out);
      bp.collect(p + ".bp", out);
    }
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    b1.collect_buffers(p + ".b1", out);
    b2.collect_buffers(p + ".b2", out);
    b3.collect_buffers(p + ".b3", out);
    if (project) bp.collect_buffers(p + ".bp", out);
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// image encoder E

/// Maps (N,3,H,W) images in [-1,1] to (N,embed_dim) feature vectors.
/// desk: five strided conv-BN-ReLU stages and global average pooling.
/// full: 50-layer residual backbone (bottleneck stacks 3-4-6-3).
template <typename S>
class ImageEncoder {
 public:
  ImageEncoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.preset == Preset::desk) {
      const Index ladder[5] = {16, 32, 64, 96, cfg.embed_dim};
      Index in_c = 3;
      for (Index c : ladder) {
        desk_stages_.emplace_back(rng, in_c, c, 3, 2, 1);
        in_c = c;
      }
    } else {
      stem_ = detail::ConvBnRelu<S>(rng, 3, 64, 7, 2, 3);
      const Index mids[4] = {64, 128, 256, 512};
      const int counts[4] = {3, 4, 6, 3};
      Index in_c = 64;
      for (int s = 0; s < 4; ++s) {
        const Index out_c = mids[s] * 4;
        for (int i = 0; i < counts[s]; ++i) {
          const Index stride = (i == 0 && s > 0) ? 2 : 1;
          res_stages_.emplace_back(rng, in_c, mids[s], out_c, stride);
          in_c = out_c;
        }
      }
      if (cfg.embed_dim != 2048) proj_ = nn::Linear<S>(rng, 2048, cfg.embed_dim);
    }
  }

  Var<S> forward(const Var<S>& images, const ForwardCtx<S>& ctx) {
    require(images.shape().rank == 4 && images.shape()[1] == 3 &&
                images.shape()[2] == cfg_.height && images.shape()[3] == cfg_.width,
            "encoder: expected (N,3," + std::to_string(cfg_.height) + "," +
                std::to_string(cfg_.width) + "), got " + images.shape().str());
    Var<S> x = images;
    if (cfg_.preset == Preset::desk) {
      for (auto& stage : desk_stages_) x = stage.forward(x, ctx);
      return global_avg_pool(x);
    }
    x = stem_->forward(x, ctx);
    x = maxpool2d(x, 3, 2, 1);
    for (auto& blk : res_stages_) x = blk.forward(x, ctx);
    x = global_avg_pool(x);
    if (proj_) x = proj_->forward(x);
    return x;
  }

  Index out_dim() const { return cfg_.embed_dim; }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    int i = 0;
    for (auto& s : desk_stages_) s.collect(p + ".stage" + std::to_string(i++), out);
    if (stem_) stem_->collect(p + ".stem", out);
    i = 0;
    for (auto& s : res_stages_) s.collect(p + ".res" + std::to_string(i++), out);
    if (proj_) proj_->collect(p + ".proj", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    int i = 0;
    for (auto& s : desk_stages_)
      s.collect_buffers(p + ".stage" + std::to_string(i++), out);
    if (stem_) stem_->collect_buffers(p + ".stem", out);
    i = 0;
    for (auto& s : res_stages_)
      s.collect_buffers(p + ".res" + std::to_string(i++), out);
  }

 private:
  ModelConfig cfg_;
  std::vector<detail::ConvBnRelu<S>> desk_stages_;
  std::optional<detail::ConvBnRelu<S>> stem_;
  std::vector<detail::Bottleneck<S>> res_stages_;
  std::optional<nn::Linear<S>> proj_;
};

// ---------------------------------------------------------------------------
// generator G (with its pose sub-network)

/// Pose sub-network: five strided conv-BN-ReLU blocks, pooled and projected
/// to a pose feature vector.
template <typename S>
class PoseEncoder {
 public:
  PoseEncoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const bool desk = cfg.preset == Preset::desk;
    const Index ladder_desk[5] = {8, 16, 32, 32, 32};
    const Index ladder_full[5] = {32, 64, 128, 128, 128};
    const Index* ladder = desk ? ladder_desk : ladder_full;
    Index in_c = pose::kNumJoints;
    for (int i = 0; i < 5; ++i) {
      blocks_.emplace_back(rng, in_c, ladder[i], 3, 2, 1);
      in_c = ladder[i];
    }
    proj_ = nn::Linear<S>(rng, in_c, cfg.pose_feat_dim);
  }

  Var<S> forward(const Var<S>& pose_maps, const ForwardCtx<S>& ctx) {
    require(pose_maps.shape().rank == 4 &&
                pose_maps.shape()[1] == pose::kNumJoints &&
                pose_maps.shape()[2] == cfg_.height &&
                pose_maps.shape()[3] == cfg_.width,
            "pose encoder: expected (N,18,H,W) at model resolution, got " +
                pose_maps.shape().str());
    Var<S> x = pose_maps;
    for (auto& b : blocks_) x = b.forward(x, ctx);
    return proj_.forward(global_avg_pool(x));
  }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    int i = 0;
    for (auto& b : blocks_) b.collect(p + ".block" + std::to_string(i++), out);
    proj_.collect(p + ".proj", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    int i = 0;
    for (auto& b : blocks_)
      b.collect_buffers(p + ".block" + std::to_string(i++), out);
  }

 private:
  ModelConfig cfg_;
  std::vector<detail::ConvBnRelu<S>> blocks_;
  nn::Linear<S> proj_;
};

template <typename S>
class Generator {
 public:
  Generator(const ModelConfig& cfg, Rng& rng) : cfg_(cfg), pose_enc_(cfg, rng) {
    const bool desk = cfg.preset == Preset::desk;
    seed_c_ = desk ? 128 : 512;
    seed_h_ = cfg.height / 32;
    seed_w_ = cfg.width / 32;
    seed_fc_ = nn::Linear<S>(rng, cfg.embed_dim + cfg.pose_feat_dim + cfg.noise_dim,
                             seed_c_ * seed_h_ * seed_w_);
    const Index ladder_desk[5] = {96, 64, 32, 16, 8};
    const Index ladder_full[5] = {256, 128, 64, 32, 16};
    const Index* ladder = desk ? ladder_desk : ladder_full;
    Index in_c = seed_c_;
    for (int i = 0; i < 5; ++i) {
      up_convs_.emplace_back(rng, in_c, ladder[i], 3, 1, 1);
      up_bns_.emplace_back(ladder[i]);
      in_c = ladder[i];
    }
    out_conv_ = nn::Conv2d<S>(rng, in_c, 3, 3, 1, 1);
    drop_.rate = static_cast<S>(cfg.dropout);
  }

  Var<S> encode_pose(const Var<S>& pose_maps, const ForwardCtx<S>& ctx) {
    return pose_enc_.forward(pose_maps, ctx);
  }

  /// Concatenates [embedding | pose feature | noise], lifts to a spatial
  /// seed, upsamples x2 five times; tanh keeps the output inside [-1,1].
  Var<S> generate(const Var<S>& embedding, const Var<S>& pose_feat,
                  const Var<S>& noise, const ForwardCtx<S>& ctx) {
    require(embedding.shape().rank == 2 && embedding.shape()[1] == cfg_.embed_dim,
            "generate: embedding must be (N," + std::to_string(cfg_.embed_dim) + ")");
    require(pose_feat.shape().rank == 2 &&
                pose_feat.shape()[1] == cfg_.pose_feat_dim &&
                pose_feat.shape()[0] == embedding.shape()[0],
            "generate: pose feature dim mismatch");
    require(noise.shape().rank == 2 && noise.shape()[1] == cfg_.noise_dim &&
                noise.shape()[0] == embedding.shape()[0],
            "generate: noise dim mismatch");
    const Index n = embedding.shape()[0];
    Var<S> z = concat_features(concat_features(embedding, pose_feat), noise);
    Var<S> x = reshape(seed_fc_.forward(z), Shape::nchw(n, seed_c_, seed_h_, seed_w_));
    for (std::size_t i = 0; i < up_convs_.size(); ++i) {
      x = upsample_nearest2(x);
      x = up_convs_[i].forward(x);
      x = up_bns_[i].forward(x, ctx.bn);
      x = drop_.forward(x, ctx);
      x = relu(x);
    }
    return tanh_val(out_conv_.forward(x));
  }

  Var<S> forward(const Var<S>& embedding, const Var<S>& pose_maps,
                 const Var<S>& noise, const ForwardCtx<S>& ctx) {
    return generate(embedding, encode_pose(pose_maps, ctx), noise, ctx);
  }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    pose_enc_.collect(p + ".pose_enc", out);
    seed_fc_.collect(p + ".seed_fc", out);
    for (std::size_t i = 0; i < up_convs_.size(); ++i) {
      up_convs_[i].collect(p + ".up" + std::to_string(i) + ".conv", out);
      up_bns_[i].collect(p + ".up" + std::to_string(i) + ".bn", out);
    }
    out_conv_.collect(p + ".out_conv", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    pose_enc_.collect_buffers(p + ".pose_enc", out);
    for (std::size_t i = 0; i < up_bns_.size(); ++i)
      up_bns_[i].collect_buffers(p + ".up" + std::to_string(i) + ".bn", out);
  }

 private:
  ModelConfig cfg_;
  PoseEncoder<S> pose_enc_;
  Index seed_c_ = 0, seed_h_ = 0, seed_w_ = 0;
  nn::Linear<S> seed_fc_;
  std::vector<nn::Conv2d<S>> up_convs_;
  std::vector<nn::BatchNorm<S>> up_bns_;
  nn::Conv2d<S> out_conv_;
  nn::Dropout<S> drop_;
};

// ---------------------------------------------------------------------------
// verification classifier V

/// Same-identity probability from two embeddings: elementwise difference,
/// elementwise square, batch norm, fully connected, sigmoid.
template <typename S>
class Verifier {
 public:
  Verifier(const ModelConfig& cfg, Rng& rng)
      : bn_(cfg.embed_dim), fc_(rng, cfg.embed_dim, 1) {}

  /// Returns (N) probabilities in (0,1).
  Var<S> forward(const Var<S>& e1, const Var<S>& e2, const ForwardCtx<S>& ctx) {
    require(e1.shape() == e2.shape() && e1.shape().rank == 2,
            "verify: embeddings must be (N,D) with equal dims");
    Var<S> d2 = square(sub(e1, e2));
    Var<S> logits = fc_.forward(bn_.forward(d2, ctx.bn));
    return reshape(sigmoid(logits), Shape::vec(e1.shape()[0]));
  }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    bn_.collect(p + ".bn", out);
    fc_.collect(p + ".fc", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    bn_.collect_buffers(p + ".bn", out);
  }

 private:
  nn::BatchNorm<S> bn_;
  nn::Linear<S> fc_;
};

// ---------------------------------------------------------------------------
// identity discriminator D_id

/// Conditional discriminator: does the candidate image carry the anchor's
/// identity (and look real)? Same head structure as V; its backbone does not
/// share weights with E unless the share-encoder ablation is enabled.
template <typename S>
class IdentityDiscriminator {
 public:
  IdentityDiscriminator(const ModelConfig& cfg, Rng& rng,
                        ImageEncoder<S>* shared_encoder)
      : bn_(cfg.embed_dim), fc_(rng, cfg.embed_dim, 1) {
    if (cfg.share_encoder_with_did) {
      require(shared_encoder != nullptr, "share-encoder ablation needs E");
      backbone_ = shared_encoder;
    } else {
      owned_backbone_ = std::make_unique<ImageEncoder<S>>(cfg, rng);
      backbone_ = owned_backbone_.get();
    }
  }

  /// (N) probabilities. Anchor and candidate run through one backbone pass.
  Var<S> forward(const Var<S>& anchor, const Var<S>& candidate,
                 const ForwardCtx<S>& ctx) {
    require(anchor.shape() == candidate.shape(), "discriminate_identity: shape");
    const Index n = anchor.shape()[0];
    Var<S> emb = backbone_->forward(concat_rows(anchor, candidate), ctx);
    Var<S> a = slice_rows(emb, 0, n);
    Var<S> b = slice_rows(emb, n, n);
    Var<S> logits = fc_.forward(bn_.forward(square(sub(a, b)), ctx.bn));
    return reshape(sigmoid(logits), Shape::vec(n));
  }

  bool owns_backbone() const { return owned_backbone_ != nullptr; }
  ImageEncoder<S>& backbone() { return *backbone_; }

  /// Shared backbones are collected under E, not here.
  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    if (owned_backbone_) owned_backbone_->collect(p + ".backbone", out);
    bn_.collect(p + ".head_bn", out);
    fc_.collect(p + ".head_fc", out);
  }
  void collect_buffers(const std::string& p, std::vector<BufferRef<S>>& out) {
    if (owned_backbone_) owned_backbone_->collect_buffers(p + ".backbone", out);
    bn_.collect_buffers(p + ".head_bn", out);
  }

 private:
  ImageEncoder<S>* backbone_ = nullptr;
  std::unique_ptr<ImageEncoder<S>> owned_backbone_;
  nn::BatchNorm<S> bn_;
  nn::Linear<S> fc_;
};

// ---------------------------------------------------------------------------
// pose discriminator D_pd

/// PatchGAN-style conditional discriminator on [image | pose map] channel
/// stacks: four strided conv-ReLU blocks, 1x1 projection, sigmoid. The
/// confidence map is input size / 2^4 per side.
template <typename S>
class PoseDiscriminator {
 public:
  PoseDiscriminator(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const bool desk = cfg.preset == Preset::desk;
    const Index ladder_desk[4] = {16, 32, 64, 64};
    const Index ladder_full[4] = {64, 128, 256, 512};
    const Index* ladder = desk ? ladder_desk : ladder_full;
    Index in_c = 3 + pose::kNumJoints;
    for (int i = 0; i < 4; ++i) {
      convs_.emplace_back(rng, in_c, ladder[i], 3, 2, 1);
      in_c = ladder[i];
    }
    proj_ = nn::Conv2d<S>(rng, in_c, 1, 1, 1, 0);
  }

  /// Returns (N,1,H/16,W/16) matching confidences in (0,1).
  Var<S> forward(const Var<S>& images, const Var<S>& pose_maps,
                 const ForwardCtx<S>& ctx) {
    (void)ctx;
    require(images.shape().rank == 4 && pose_maps.shape().rank == 4 &&
                images.shape()[2] == pose_maps.shape()[2] &&
                images.shape()[3] == pose_maps.shape()[3],
            "discriminate_pose: image and pose map must share spatial size");
    Var<S> x = concat_channels(images, pose_maps);
    for (auto& c : convs_) x = relu(c.forward(x));
    return sigmoid(proj_.forward(x));
  }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    int i = 0;
    for (auto& c : convs_) c.collect(p + ".conv" + std::to_string(i++), out);
    proj_.collect(p + ".proj", out);
  }
  void collect_buffers(const std::string&, std::vector<BufferRef<S>>&) {}

 private:
  ModelConfig cfg_;
  std::vector<nn::Conv2d<S>> convs_;
  nn::Conv2d<S> proj_;
};

/// Identity-classification head for the single-branch baseline ablation.
template <typename S>
class IdClassifier {
 public:
  IdClassifier(const ModelConfig& cfg, Rng& rng)
      : fc_(rng, cfg.embed_dim, cfg.n_identities) {}

  Var<S> forward(const Var<S>& emb) { return fc_.forward(emb); }

  void collect(const std::string& p, std::vector<ParamRef<S>>& out) {
    fc_.collect(p + ".fc", out);
  }

 private:
  nn::Linear<S> fc_;
};

// ---------------------------------------------------------------------------
// bundle

enum class Block { E, G, V, Did, Dpd, Cls };

inline const char* block_name(Block b) {
  switch (b) {
    case Block::E: return "E";
    case Block::G: return "G";
    case Block::V: return "V";
    case Block::Did: return "D_id";
    case Block::Dpd: return "D_pd";
    case Block::Cls: return "Cls";
  }
  return "?";
}

inline std::vector<Block> all_blocks() {
  return {Block::E, Block::G, Block::V, Block::Did, Block::Dpd, Block::Cls};
}

/// Owns the five blocks (plus the optional classifier head) and exposes
/// per-block parameter groups for optimizers, freezing, hashing, and
/// checkpointing. Block init streams are decoupled so loading one block from
/// a checkpoint never shifts another block's fresh initialization.
template <typename S>
class FdGan {
 public:
  FdGan(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng_e(seed * 6364136223846793005ULL + 1);
    Rng rng_g(seed * 6364136223846793005ULL + 2);
    Rng rng_v(seed * 6364136223846793005ULL + 3);
    Rng rng_did(seed * 6364136223846793005ULL + 4);
    Rng rng_dpd(seed * 6364136223846793005ULL + 5);
    encoder = std::make_unique<ImageEncoder<S>>(cfg_, rng_e);
    generator = std::make_unique<Generator<S>>(cfg_, rng_g);
    verifier = std::make_unique<Verifier<S>>(cfg_, rng_v);
    id_disc = std::make_unique<IdentityDiscriminator<S>>(cfg_, rng_did,
                                                         encoder.get());
    pose_disc = std::make_unique<PoseDiscriminator<S>>(cfg_, rng_dpd);
    if (cfg_.single_branch_classifier) {
      Rng rng_cls(seed * 6364136223846793005ULL + 6);
      classifier = std::make_unique<IdClassifier<S>>(cfg_, rng_cls);
    }
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<ParamRef<S>> params(Block b) {
    std::vector<ParamRef<S>> out;
    switch (b) {
      case Block::E: encoder->collect("E", out); break;
      case Block::G: generator->collect("G", out); break;
      case Block::V: verifier->collect("V", out); break;
      case Block::Did: id_disc->collect("D_id", out); break;
      case Block::Dpd: pose_disc->collect("D_pd", out); break;
      case Block::Cls:
        if (classifier) classifier->collect("Cls", out);
        break;
    }
    return out;
  }

  std::vector<BufferRef<S>> buffers(Block b) {
    std::vector<BufferRef<S>> out;
    switch (b) {
      case Block::E: encoder->collect_buffers("E", out); break;
      case Block::G: generator->collect_buffers("G", out); break;
      case Block::V: verifier->collect_buffers("V", out); break;
      case Block::Did: id_disc->collect_buffers("D_id", out); break;
      case Block::Dpd: pose_disc->collect_buffers("D_pd", out); break;
      case Block::Cls: break;
    }
    return out;
  }

  void set_requires_grad(Block b, bool rg) {
    for (auto& p : params(b)) p.var.set_requires_grad(rg);
  }

  void zero_grad_all() {
    for (Block b : all_blocks())
      for (auto& p : params(b)) p.var.zero_grad();
  }

  /// Bit-exact digest over parameters and running statistics of a block.
  std::uint64_t weight_hash(Block b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& p : params(b)) {
      h = fnv1a(p.name.data(), p.name.size(), h);
      h = hash_array(p.var.value(), h);
    }
    for (auto& buf : buffers(b)) {
      h = fnv1a(buf.name.data(), buf.name.size(), h);
      h = hash_array(*buf.data, h);
    }
    return h;
  }

  std::unique_ptr<ImageEncoder<S>> encoder;
  std::unique_ptr<Generator<S>> generator;
  std::unique_ptr<Verifier<S>> verifier;
  std::unique_ptr<IdentityDiscriminator<S>> id_disc;
  std::unique_ptr<PoseDiscriminator<S>> pose_disc;
  std::unique_ptr<IdClassifier<S>> classifier;

 private:
  ModelConfig cfg_;
};

}  // namespace fdgan::models
