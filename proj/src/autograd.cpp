#include "psd/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <unordered_set>

#include "psd/error.hpp"
#include "psd/losses.hpp"

namespace psd::ag {

namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

thread_local bool g_grad_enabled = true;

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v && v->requires_grad; });
    if (needs) {
      node->requires_grad = true;
      node->inputs = std::move(inputs);
      node->backward_fn = std::move(fn);
    }
  }
  return node;
}

bool wants_grad(const Var& v) { return v && v->requires_grad; }

// Column buffer rows are (channel, ky, kx); columns are output positions.
void im2col(const float* src, int channels, int height, int width, int kernel, int stride, int pad, int out_h,
            int out_w, float* col) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const float* plane = src + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        float* row = col + (static_cast<std::size_t>(c) * kernel * kernel + ky * kernel + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, 0.0f);
            continue;
          }
          const float* line = plane + static_cast<std::size_t>(iy) * width;
          if (stride == 1) {
            const int shift = kx - pad;
            const int lo = std::max(0, -shift);
            const int hi = std::min(out_w, width - shift);
            std::fill(dst, dst + std::max(lo, 0), 0.0f);
            if (hi > lo) std::memcpy(dst + lo, line + lo + shift, sizeof(float) * (hi - lo));
            if (hi < out_w) std::fill(dst + std::max(hi, lo), dst + out_w, 0.0f);
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride - pad + kx;
              dst[ox] = (ix < 0 || ix >= width) ? 0.0f : line[ix];
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int height, int width, int kernel, int stride, int pad, int out_h,
            int out_w, float* dst) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    float* plane = dst + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const float* row = col + (static_cast<std::size_t>(c) * kernel * kernel + ky * kernel + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          float* line = plane + static_cast<std::size_t>(iy) * width;
          const float* srow = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) line[ix] += srow[ox];
          }
        }
      }
    }
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes " + a.shape_string() + " and " + b.shape_string() + " differ");
  }
}

}  // namespace

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  float* d = buf.data();
  const float* s = g.data();
  for (std::size_t i = 0; i < buf.size(); ++i) d[i] += s[i];
}

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.n(), value.c(), value.h(), value.w());
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return node;
}

Var leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (!root || root->value.size() != 1) throw InvalidArgument("backward() needs a scalar root");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// --- layers ------------------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  const Tensor& X = x->value;
  const Tensor& W = weight->value;
  if (X.c() != W.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(X.c()) + " channels, weight expects " +
                     std::to_string(W.c()));
  }
  const int n = X.n(), cin = X.c(), h = X.h(), w = X.w();
  const int cout = W.n(), k = W.h();
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d: input " + X.shape_string() + " too small for kernel");
  const bool direct = (k == 1 && stride == 1 && padding == 0);
  const int rows = cin * k * k;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;

  Tensor Y(n, cout, oh, ow);
  CMapRM wm(W.data(), cout, rows);
  MatRM col;
  if (!direct) col.resize(rows, static_cast<Eigen::Index>(cols));
  for (int i = 0; i < n; ++i) {
    MapRM ym(Y.plane(i, 0), cout, static_cast<Eigen::Index>(cols));
    if (direct) {
      ym.noalias() = wm * CMapRM(X.plane(i, 0), cin, static_cast<Eigen::Index>(cols));
    } else {
      im2col(X.plane(i, 0), cin, h, w, k, stride, padding, oh, ow, col.data());
      ym.noalias() = wm * col;
    }
    if (bias) {
      for (int c = 0; c < cout; ++c) ym.row(c).array() += bias->value[c];
    }
  }

  return make_node(std::move(Y), {x, weight, bias}, [=](Node& self) {
    const Var& xin = self.inputs[0];
    const Var& wv = self.inputs[1];
    const Var& bv = self.inputs[2];
    const Tensor& Xv = xin->value;
    CMapRM wmat(wv->value.data(), cout, rows);
    MatRM colb;
    MatRM dcol;
    if (!direct) colb.resize(rows, static_cast<Eigen::Index>(cols));
    float* gx = wants_grad(xin) ? xin->grad_buffer().data() : nullptr;
    float* gw = wants_grad(wv) ? wv->grad_buffer().data() : nullptr;
    float* gb = wants_grad(bv) ? bv->grad_buffer().data() : nullptr;
    for (int i = 0; i < n; ++i) {
      CMapRM dy(self.grad.plane(i, 0), cout, static_cast<Eigen::Index>(cols));
      if (gb) {
        // Plain loop: Eigen's vectorised sum depends on buffer alignment.
        for (int c = 0; c < cout; ++c) {
          const float* row = self.grad.plane(i, 0) + static_cast<std::size_t>(c) * cols;
          double s = 0.0;
          for (std::size_t j = 0; j < cols; ++j) s += row[j];
          gb[c] += static_cast<float>(s);
        }
      }
      if (gw) {
        MapRM dw(gw, cout, rows);
        if (direct) {
          dw.noalias() += dy * CMapRM(Xv.plane(i, 0), cin, static_cast<Eigen::Index>(cols)).transpose();
        } else {
          im2col(Xv.plane(i, 0), cin, h, w, k, stride, padding, oh, ow, colb.data());
          dw.noalias() += dy * colb.transpose();
        }
      }
      if (gx) {
        float* gplane = gx + static_cast<std::size_t>(i) * cin * h * w;
        if (direct) {
          MapRM(gplane, cin, static_cast<Eigen::Index>(cols)).noalias() += wmat.transpose() * dy;
        } else {
          dcol.noalias() = wmat.transpose() * dy;
          col2im(dcol.data(), cin, h, w, k, stride, padding, oh, ow, gplane);
        }
      }
    }
  });
}

Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& X = x->value;
  const Tensor& W = weight->value;
  if (X.c() != W.n()) {
    throw ShapeError("conv_transpose2x2: input has " + std::to_string(X.c()) + " channels, weight expects " +
                     std::to_string(W.n()));
  }
  const int n = X.n(), cin = X.c(), h = X.h(), w = X.w();
  const int cout = W.c();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor Y(n, cout, 2 * h, 2 * w);
  CMapRM wm(W.data(), cin, cout * 4);
  MatRM t(cout * 4, static_cast<Eigen::Index>(hw));
  for (int i = 0; i < n; ++i) {
    t.noalias() = wm.transpose() * CMapRM(X.plane(i, 0), cin, static_cast<Eigen::Index>(hw));
    for (int co = 0; co < cout; ++co) {
      float* out = Y.plane(i, co);
      const float b = bias ? bias->value[co] : 0.0f;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const float* src = t.data() + static_cast<std::size_t>(co * 4 + dy * 2 + dx) * hw;
          for (int y = 0; y < h; ++y) {
            float* line = out + static_cast<std::size_t>(2 * y + dy) * 2 * w + dx;
            const float* s = src + static_cast<std::size_t>(y) * w;
            for (int xx = 0; xx < w; ++xx) line[2 * xx] = s[xx] + b;
          }
        }
      }
    }
  }

  return make_node(std::move(Y), {x, weight, bias}, [=](Node& self) {
    const Var& xin = self.inputs[0];
    const Var& wv = self.inputs[1];
    const Var& bv = self.inputs[2];
    CMapRM wmat(wv->value.data(), cin, cout * 4);
    MatRM g(cout * 4, static_cast<Eigen::Index>(hw));
    float* gx = wants_grad(xin) ? xin->grad_buffer().data() : nullptr;
    float* gw = wants_grad(wv) ? wv->grad_buffer().data() : nullptr;
    float* gb = wants_grad(bv) ? bv->grad_buffer().data() : nullptr;
    for (int i = 0; i < n; ++i) {
      for (int co = 0; co < cout; ++co) {
        const float* dout = self.grad.plane(i, co);
        double bsum = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            float* dst = g.data() + static_cast<std::size_t>(co * 4 + dy * 2 + dx) * hw;
            for (int y = 0; y < h; ++y) {
              const float* line = dout + static_cast<std::size_t>(2 * y + dy) * 2 * w + dx;
              float* d = dst + static_cast<std::size_t>(y) * w;
              for (int xx = 0; xx < w; ++xx) {
                d[xx] = line[2 * xx];
                bsum += line[2 * xx];
              }
            }
          }
        }
        if (gb) gb[co] += static_cast<float>(bsum);
      }
      CMapRM xm(xin->value.plane(i, 0), cin, static_cast<Eigen::Index>(hw));
      if (gw) MapRM(gw, cin, cout * 4).noalias() += xm * g.transpose();
      if (gx) {
        MapRM(gx + static_cast<std::size_t>(i) * cin * hw, cin, static_cast<Eigen::Index>(hw)).noalias() += wmat * g;
      }
    }
  });
}

Var max_pool2x2(const Var& x) {
  const Tensor& X = x->value;
  if (X.h() % 2 != 0) throw ShapeError("max_pool2x2: height " + std::to_string(X.h()) + " is odd");
  if (X.w() % 2 != 0) throw ShapeError("max_pool2x2: width " + std::to_string(X.w()) + " is odd");
  const int oh = X.h() / 2, ow = X.w() / 2, w = X.w();
  Tensor Y(X.n(), X.c(), oh, ow);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(Y.size());
  for (int i = 0; i < X.n(); ++i) {
    for (int c = 0; c < X.c(); ++c) {
      const float* src = X.plane(i, c);
      float* dst = Y.plane(i, c);
      const std::size_t in_base = src - X.data();
      const std::size_t out_base = dst - Y.data();
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          std::size_t best = static_cast<std::size_t>(2 * y) * w + 2 * xx;
          const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
          for (std::size_t q : cand) {
            if (src[q] > src[best]) best = q;
          }
          dst[static_cast<std::size_t>(y) * ow + xx] = src[best];
          (*argmax)[out_base + static_cast<std::size_t>(y) * ow + xx] = static_cast<std::uint32_t>(in_base + best);
        }
      }
    }
  }
  return make_node(std::move(Y), {x}, [argmax](Node& self) {
    float* g = self.inputs[0]->grad_buffer().data();
    const float* dy = self.grad.data();
    for (std::size_t i = 0; i < argmax->size(); ++i) g[(*argmax)[i]] += dy[i];
  });
}

Var relu(const Var& x) {
  Tensor Y = x->value;
  for (float& v : Y.span()) v = v > 0.0f ? v : 0.0f;
  return make_node(std::move(Y), {x}, [](Node& self) {
    float* g = self.inputs[0]->grad_buffer().data();
    const float* out = self.value.data();
    const float* dy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      if (out[i] > 0.0f) g[i] += dy[i];
    }
  });
}

Var leaky_relu(const Var& x, float slope) {
  Tensor Y = x->value;
  for (float& v : Y.span()) v = v > 0.0f ? v : v * slope;
  return make_node(std::move(Y), {x}, [slope](Node& self) {
    const Tensor& in = self.inputs[0]->value;
    float* g = self.inputs[0]->grad_buffer().data();
    const float* dy = self.grad.data();
    for (std::size_t i = 0; i < in.size(); ++i) g[i] += in[i] > 0.0f ? dy[i] : slope * dy[i];
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("concat_channels: nothing to concatenate");
  const Tensor& first = parts.front()->value;
  int total = 0;
  for (const Var& p : parts) {
    const Tensor& t = p->value;
    if (t.n() != first.n() || t.h() != first.h() || t.w() != first.w()) {
      throw ShapeError("concat_channels: " + t.shape_string() + " does not match " + first.shape_string());
    }
    total += t.c();
  }
  const std::size_t hw = static_cast<std::size_t>(first.h()) * first.w();
  Tensor Y(first.n(), total, first.h(), first.w());
  for (int i = 0; i < first.n(); ++i) {
    int offset = 0;
    for (const Var& p : parts) {
      std::memcpy(Y.plane(i, offset), p->value.plane(i, 0), sizeof(float) * hw * p->value.c());
      offset += p->value.c();
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_node(std::move(Y), std::move(inputs), [hw](Node& self) {
    for (int i = 0; i < self.value.n(); ++i) {
      int offset = 0;
      for (const Var& p : self.inputs) {
        const int c = p->value.c();
        if (p->requires_grad) {
          float* g = p->grad_buffer().plane(i, 0);
          const float* dy = self.grad.plane(i, offset);
          for (std::size_t q = 0; q < hw * c; ++q) g[q] += dy[q];
        }
        offset += c;
      }
    }
  });
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                     float momentum, float eps) {
  const Tensor& X = x->value;
  const int n = X.n(), ch = X.c();
  const std::size_t hw = static_cast<std::size_t>(X.h()) * X.w();
  const double count = static_cast<double>(n) * hw;
  if (count < 2) throw ShapeError("batch_norm: need more than one value per channel in training mode");
  auto mean = std::make_shared<std::vector<double>>(ch);
  auto invstd = std::make_shared<std::vector<double>>(ch);
  Tensor Y(n, ch, X.h(), X.w());
  for (int c = 0; c < ch; ++c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* p = X.plane(i, c);
      for (std::size_t q = 0; q < hw; ++q) s += p[q];
    }
    const double m = s / count;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* p = X.plane(i, c);
      for (std::size_t q = 0; q < hw; ++q) v += (p[q] - m) * (p[q] - m);
    }
    const double var = v / count;
    (*mean)[c] = m;
    (*invstd)[c] = 1.0 / std::sqrt(var + eps);
    running_mean[c] = static_cast<float>((1.0 - momentum) * running_mean[c] + momentum * m);
    running_var[c] = static_cast<float>((1.0 - momentum) * running_var[c] + momentum * v / (count - 1.0));
    const double g = gamma->value[c], b = beta->value[c];
    for (int i = 0; i < n; ++i) {
      const float* p = X.plane(i, c);
      float* o = Y.plane(i, c);
      for (std::size_t q = 0; q < hw; ++q) o[q] = static_cast<float>(g * (p[q] - m) * (*invstd)[c] + b);
    }
  }
  return make_node(std::move(Y), {x, gamma, beta}, [=](Node& self) {
    const Var& xin = self.inputs[0];
    const Tensor& Xv = xin->value;
    float* gx = wants_grad(xin) ? xin->grad_buffer().data() : nullptr;
    float* gg = wants_grad(self.inputs[1]) ? self.inputs[1]->grad_buffer().data() : nullptr;
    float* gbeta = wants_grad(self.inputs[2]) ? self.inputs[2]->grad_buffer().data() : nullptr;
    for (int c = 0; c < ch; ++c) {
      const double m = (*mean)[c], is = (*invstd)[c];
      const double gam = self.inputs[1]->value[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = Xv.plane(i, c);
        const float* dy = self.grad.plane(i, c);
        for (std::size_t q = 0; q < hw; ++q) {
          sum_dy += dy[q];
          sum_dy_xhat += dy[q] * (p[q] - m) * is;
        }
      }
      if (gg) gg[c] += static_cast<float>(sum_dy_xhat);
      if (gbeta) gbeta[c] += static_cast<float>(sum_dy);
      if (gx) {
        for (int i = 0; i < n; ++i) {
          const float* p = Xv.plane(i, c);
          const float* dy = self.grad.plane(i, c);
          float* g = gx + (static_cast<std::size_t>(i) * ch + c) * hw;
          for (std::size_t q = 0; q < hw; ++q) {
            const double xhat = (p[q] - m) * is;
            g[q] += static_cast<float>(gam * is * (dy[q] - sum_dy / count - xhat * sum_dy_xhat / count));
          }
        }
      }
    }
  });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Tensor& running_mean,
                    const Tensor& running_var, float eps) {
  const Tensor& X = x->value;
  const int ch = X.c();
  const std::size_t hw = static_cast<std::size_t>(X.h()) * X.w();
  std::vector<float> a(ch), b(ch);
  for (int c = 0; c < ch; ++c) {
    a[c] = static_cast<float>(gamma->value[c] / std::sqrt(static_cast<double>(running_var[c]) + eps));
    b[c] = beta->value[c] - a[c] * running_mean[c];
  }
  Tensor Y = X;
  for (int i = 0; i < X.n(); ++i) {
    for (int c = 0; c < ch; ++c) {
      float* o = Y.plane(i, c);
      for (std::size_t q = 0; q < hw; ++q) o[q] = a[c] * o[q] + b[c];
    }
  }
  return make_node(std::move(Y), {x, gamma, beta}, [a, hw](Node& self) {
    const Var& xin = self.inputs[0];
    const Tensor& Xv = xin->value;
    float* gx = wants_grad(xin) ? xin->grad_buffer().data() : nullptr;
    float* gg = wants_grad(self.inputs[1]) ? self.inputs[1]->grad_buffer().data() : nullptr;
    float* gbeta = wants_grad(self.inputs[2]) ? self.inputs[2]->grad_buffer().data() : nullptr;
    const int ch = Xv.c();
    for (int i = 0; i < Xv.n(); ++i) {
      for (int c = 0; c < ch; ++c) {
        const float* dy = self.grad.plane(i, c);
        const float* out = self.value.plane(i, c);
        const float gam = self.inputs[1]->value[c];
        const float bet = self.inputs[2]->value[c];
        double sdy = 0.0, sdyx = 0.0;
        for (std::size_t q = 0; q < hw; ++q) {
          sdy += dy[q];
          if (gam != 0.0f) sdyx += dy[q] * (out[q] - bet) / gam;
          if (gx) gx[(static_cast<std::size_t>(i) * ch + c) * hw + q] += a[c] * dy[q];
        }
        if (gg) gg[c] += static_cast<float>(sdyx);
        if (gbeta) gbeta[c] += static_cast<float>(sdy);
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& X = x->value;
  const std::size_t hw = static_cast<std::size_t>(X.h()) * X.w();
  Tensor Y(X.n(), X.c(), 1, 1);
  for (int i = 0; i < X.n(); ++i) {
    for (int c = 0; c < X.c(); ++c) {
      const float* p = X.plane(i, c);
      double s = 0.0;
      for (std::size_t q = 0; q < hw; ++q) s += p[q];
      Y[static_cast<std::size_t>(i) * X.c() + c] = static_cast<float>(s / static_cast<double>(hw));
    }
  }
  return make_node(std::move(Y), {x}, [hw](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const float inv = 1.0f / static_cast<float>(hw);
    for (int i = 0; i < g.n(); ++i) {
      for (int c = 0; c < g.c(); ++c) {
        const float d = self.grad[static_cast<std::size_t>(i) * g.c() + c] * inv;
        float* p = g.plane(i, c);
        for (std::size_t q = 0; q < hw; ++q) p[q] += d;
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& X = x->value;
  const Tensor& W = weight->value;
  if (X.h() != 1 || X.w() != 1 || X.c() != W.c()) {
    throw ShapeError("linear: input " + X.shape_string() + " incompatible with weight " + W.shape_string());
  }
  const int n = X.n(), in = X.c(), out = W.n();
  Tensor Y(n, out, 1, 1);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out; ++o) {
      double s = bias ? bias->value[o] : 0.0;
      for (int c = 0; c < in; ++c) s += static_cast<double>(W[static_cast<std::size_t>(o) * in + c]) * X[static_cast<std::size_t>(i) * in + c];
      Y[static_cast<std::size_t>(i) * out + o] = static_cast<float>(s);
    }
  }
  return make_node(std::move(Y), {x, weight, bias}, [n, in, out](Node& self) {
    const Var& xin = self.inputs[0];
    const Var& wv = self.inputs[1];
    const Var& bv = self.inputs[2];
    float* gx = wants_grad(xin) ? xin->grad_buffer().data() : nullptr;
    float* gw = wants_grad(wv) ? wv->grad_buffer().data() : nullptr;
    float* gb = wants_grad(bv) ? bv->grad_buffer().data() : nullptr;
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < out; ++o) {
        const float d = self.grad[static_cast<std::size_t>(i) * out + o];
        if (gb) gb[o] += d;
        for (int c = 0; c < in; ++c) {
          if (gw) gw[static_cast<std::size_t>(o) * in + c] += d * xin->value[static_cast<std::size_t>(i) * in + c];
          if (gx) gx[static_cast<std::size_t>(i) * in + c] += d * wv->value[static_cast<std::size_t>(o) * in + c];
        }
      }
    }
  });
}

// --- elementwise / reductions -------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same(a->value, b->value, "add");
  Tensor Y = a->value;
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += b->value[i];
  return make_node(std::move(Y), {a, b}, [](Node& self) {
    for (const Var& in : self.inputs) {
      if (in->requires_grad) in->accumulate(self.grad);
    }
  });
}

Var mul_const(const Var& a, const Tensor& k) {
  require_same(a->value, k, "mul_const");
  Tensor Y = a->value;
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= k[i];
  return make_node(std::move(Y), {a}, [k](Node& self) {
    float* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < k.size(); ++i) g[i] += self.grad[i] * k[i];
  });
}

Var scale(const Var& a, float k) {
  Tensor Y = a->value;
  for (float& v : Y.span()) v *= k;
  return make_node(std::move(Y), {a}, [k](Node& self) {
    float* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * k;
  });
}

Var mean(const Var& x) {
  const Tensor& X = x->value;
  if (X.empty()) throw InvalidArgument("mean of an empty tensor");
  double s = 0.0;
  for (float v : X.span()) s += v;
  Tensor Y(1, 1, 1, 1, static_cast<float>(s / static_cast<double>(X.size())));
  return make_node(std::move(Y), {x}, [](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const float d = self.grad[0] / static_cast<float>(g.size());
    for (float& v : g.span()) v += d;
  });
}

Var l1_loss(const Var& prediction, const Tensor& target) {
  require_same(prediction->value, target, "l1_loss");
  const double count = static_cast<double>(target.size());
  const double value = kernels::abs_diff_sum(prediction->value.span(), target.span()) / count;
  return make_node(Tensor(1, 1, 1, 1, static_cast<float>(value)), {prediction}, [target, count](Node& self) {
    const Tensor& p = self.inputs[0]->value;
    float* g = self.inputs[0]->grad_buffer().data();
    const float d = static_cast<float>(self.grad[0] / count);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float diff = p[i] - target[i];
      if (diff > 0.0f) {
        g[i] += d;
      } else if (diff < 0.0f) {
        g[i] -= d;
      }
    }
  });
}

Var mse_loss(const Var& prediction, const Tensor& target) {
  require_same(prediction->value, target, "mse_loss");
  const double count = static_cast<double>(target.size());
  const double value = kernels::sq_diff_sum(prediction->value.span(), target.span()) / count;
  return make_node(Tensor(1, 1, 1, 1, static_cast<float>(value)), {prediction}, [target, count](Node& self) {
    const Tensor& p = self.inputs[0]->value;
    float* g = self.inputs[0]->grad_buffer().data();
    const double d = 2.0 * self.grad[0] / count;
    for (std::size_t i = 0; i < p.size(); ++i) g[i] += static_cast<float>(d * (p[i] - target[i]));
  });
}

Var tv_loss(const Var& x) {
  const Tensor& X = x->value;
  if (X.h() < 2 || X.w() < 2) throw ShapeError("tv_loss: image smaller than 2x2");
  double total = 0.0;
  for (int i = 0; i < X.n(); ++i) {
    for (int c = 0; c < X.c(); ++c) total += kernels::tv_value(X.plane(i, c), X.w(), X.h());
  }
  const double n = X.n();
  return make_node(Tensor(1, 1, 1, 1, static_cast<float>(total / n)), {x}, [n](Node& self) {
    const Tensor& Xv = self.inputs[0]->value;
    Tensor& g = self.inputs[0]->grad_buffer();
    const double s = self.grad[0] / n;
    for (int i = 0; i < Xv.n(); ++i) {
      for (int c = 0; c < Xv.c(); ++c) kernels::tv_gradient(Xv.plane(i, c), Xv.w(), Xv.h(), s, g.plane(i, c));
    }
  });
}

}  // namespace psd::ag
