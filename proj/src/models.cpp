#include "pfkd/models.hpp"

#include <sstream>

namespace pfkd {

std::uint64_t fingerprint(const VitSpec& spec) {
  std::ostringstream os;
  os << "vit|L" << spec.patch.window_len << "|A" << spec.patch.axes << "|C" << spec.patch.channels
     << "|Lp" << spec.patch.patch_len << "|Ap" << spec.patch.patch_axes << "|layers" << spec.layers
     << "|heads" << spec.heads << "|hidden" << spec.hidden << "|mlp" << spec.mlp << "|drop"
     << spec.dropout << "|classes" << spec.num_classes;
  return detail::fnv1a64(os.str());
}

std::uint64_t fingerprint(const CnnSpec& spec) {
  std::ostringstream os;
  os << "cnn|L" << spec.window_len << "|A" << spec.axes << "|blocks" << spec.conv_blocks << "|f"
     << spec.filters << "|k" << spec.kernel_h << "x" << spec.kernel_w << "|pool" << spec.pool_h
     << "x" << spec.pool_w << "|drop" << spec.dropout << "|mlp" << spec.mlp_hidden << "|classes"
     << spec.num_classes;
  return detail::fnv1a64(os.str());
}

const char* FlopCount::conventions() {
  return "per-window inference FLOPs: matmul/linear 2*in*out per application; "
         "conv 2*Cout*Cin*kh*kw*Hout*Wout; attention score and context matmuls "
         "2*T^2*d_attn each; norms and activations 2 per element; pooling 1 per "
         "input element; dropout is identity at inference and costs 0";
}

namespace {

void push(FlopCount& fc, std::string name, std::int64_t flops) {
  fc.items.push_back({std::move(name), flops});
  fc.total += flops;
}

}  // namespace

FlopCount count_flops(const VitSpec& spec) {
  spec.validate();
  FlopCount fc;
  const std::int64_t n = spec.patch.num_patches(), p = spec.patch.patch_dim();
  const std::int64_t d = spec.hidden, da = spec.attn_dim(), t = spec.seq_len();
  push(fc, "embed.proj", n * 2 * p * d);
  for (std::int64_t l = 0; l < spec.layers; ++l) {
    const std::string pre = "enc" + std::to_string(l) + ".";
    push(fc, pre + "ln1", 2 * t * d);
    push(fc, pre + "attn.qkv", 3 * t * 2 * d * da);
    push(fc, pre + "attn.scores", 2 * t * t * da);
    push(fc, pre + "attn.softmax", 2 * spec.heads * t * t);
    push(fc, pre + "attn.context", 2 * t * t * da);
    push(fc, pre + "attn.out", t * 2 * da * d);
    push(fc, pre + "ln2", 2 * t * d);
    push(fc, pre + "mlp.fc1", t * 2 * d * spec.mlp);
    push(fc, pre + "mlp.act", 2 * t * spec.mlp);
    push(fc, pre + "mlp.fc2", t * 2 * spec.mlp * d);
  }
  push(fc, "final_ln", 2 * t * d);
  push(fc, "head", 2 * d * spec.num_classes);
  return fc;
}

FlopCount count_flops(const CnnSpec& spec) {
  spec.validate();
  FlopCount fc;
  std::int64_t cin = 1, h = spec.window_len, w = spec.axes;
  for (std::int64_t blk = 0; blk < spec.conv_blocks; ++blk) {
    const std::string pre = "block" + std::to_string(blk) + ".";
    push(fc, pre + "conv", 2 * spec.filters * cin * spec.kernel_h * spec.kernel_w * h * w);
    push(fc, pre + "bn", 2 * spec.filters * h * w);
    push(fc, pre + "prelu", 2 * spec.filters * h * w);
    push(fc, pre + "pool", spec.filters * h * w);
    h /= spec.pool_h;
    w /= spec.pool_w;
    cin = spec.filters;
  }
  push(fc, "fc1", 2 * spec.flat_dim() * spec.mlp_hidden);
  push(fc, "fc.prelu", 2 * spec.mlp_hidden);
  push(fc, "fc2", 2 * spec.mlp_hidden * spec.num_classes);
  push(fc, "log_softmax", 2 * spec.num_classes);
  return fc;
}

}  // namespace pfkd
