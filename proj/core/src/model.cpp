#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void require_finite(const ParamVector& params, const char* where) {
    for (float v : params.values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + ": non-finite parameter value");
        }
    }
}

// Hidden-layer activations for one forward pass, all in double.
struct ForwardTrace {
    std::vector<MatD> activations;  // activations[0] is the input, size L+1
    std::vector<MatD> preacts;      // pre-activation values per layer, size L
};

MatD input_to_double(const Batch& batch) {
    MatD x(batch.features.rows, batch.features.cols);
    for (std::size_t i = 0; i < batch.features.data.size(); ++i) {
        x.data[i] = static_cast<double>(batch.features.data[i]);
    }
    return x;
}

void apply_layer(const ParamVector& params, std::size_t layer, const MatD& x, MatD& z) {
    const LayerShape& sh = params.shapes[layer];
    const std::size_t in = sh.spec.input_dim;
    const std::size_t out = sh.spec.output_dim;
    const float* w = params.values.data() + sh.offset;          // in x out, row-major
    const float* b = params.values.data() + sh.offset + sh.weight_count;

    z = MatD(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        double* zr = z.row_ptr(r);
        for (std::size_t j = 0; j < out; ++j) {
            zr[j] = static_cast<double>(b[j]);
        }
        for (std::size_t k = 0; k < in; ++k) {
            const double xv = xr[k];
            const float* wrow = w + k * out;
            for (std::size_t j = 0; j < out; ++j) {
                zr[j] += xv * static_cast<double>(wrow[j]);
            }
        }
    }
}

ForwardTrace forward_trace(const ParamVector& params, const Batch& batch) {
    if (params.shapes.empty()) {
        throw ConfigError("forward: parameter vector has no layers");
    }
    if (batch.features.cols != params.shapes.front().spec.input_dim) {
        throw ConfigError("forward: batch feature dim " + std::to_string(batch.features.cols) +
                          " != model input dim " +
                          std::to_string(params.shapes.front().spec.input_dim));
    }
    require_finite(params, "forward");

    ForwardTrace t;
    t.activations.reserve(params.shapes.size() + 1);
    t.preacts.resize(params.shapes.size());
    t.activations.push_back(input_to_double(batch));

    for (std::size_t l = 0; l < params.shapes.size(); ++l) {
        apply_layer(params, l, t.activations.back(), t.preacts[l]);
        MatD a = t.preacts[l];
        if (params.shapes[l].spec.activation == Activation::relu) {
            for (double& v : a.data) {
                if (v < 0.0) v = 0.0;
            }
        }
        t.activations.push_back(std::move(a));
    }
    return t;
}

// Mean cross-entropy of logits against labels; optionally writes
// d(loss)/d(logits) into dlogits.
double softmax_ce(const MatD& logits, std::span<const std::int32_t> labels, MatD* dlogits) {
    const std::size_t n = logits.rows;
    const std::size_t c = logits.cols;
    if (dlogits != nullptr) {
        *dlogits = MatD(n, c);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.row_ptr(i);
        double m = z[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - m);
        const double lse = m + std::log(sum);
        total += lse - z[labels[i]];
        if (dlogits != nullptr) {
            double* d = dlogits->row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) {
                d[j] = std::exp(z[j] - m) / sum / static_cast<double>(n);
            }
            d[labels[i]] -= 1.0 / static_cast<double>(n);
        }
    }
    return total / static_cast<double>(n);
}

} // namespace

std::span<float> ParamVector::layer_slice(std::size_t layer) {
    const LayerShape& sh = shapes[layer];
    return {values.data() + sh.offset, sh.weight_count + sh.bias_count};
}

std::span<const float> ParamVector::layer_slice(std::size_t layer) const {
    const LayerShape& sh = shapes[layer];
    return {values.data() + sh.offset, sh.weight_count + sh.bias_count};
}

bool ParamVector::same_shape(const ParamVector& other) const {
    if (shapes.size() != other.shapes.size()) return false;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (shapes[i].spec.input_dim != other.shapes[i].spec.input_dim ||
            shapes[i].spec.output_dim != other.shapes[i].spec.output_dim) {
            return false;
        }
    }
    return values.size() == other.values.size();
}

std::vector<LayerShape> build_shapes(const std::vector<LayerSpec>& arch) {
    if (arch.empty()) {
        throw ConfigError("build_shapes: empty architecture");
    }
    std::vector<LayerShape> shapes;
    shapes.reserve(arch.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        const LayerSpec& spec = arch[i];
        if (spec.input_dim < 1 || spec.output_dim < 1) {
            throw ConfigError("build_shapes: layer " + std::to_string(i) + " has zero dim");
        }
        if (i > 0 && arch[i - 1].output_dim != spec.input_dim) {
            throw ConfigError("build_shapes: layer " + std::to_string(i) + " input dim " +
                              std::to_string(spec.input_dim) + " does not chain from previous output " +
                              std::to_string(arch[i - 1].output_dim));
        }
        LayerShape sh;
        sh.spec = spec;
        sh.weight_count = spec.input_dim * spec.output_dim;
        sh.bias_count = spec.output_dim;
        sh.offset = offset;
        offset += sh.weight_count + sh.bias_count;
        shapes.push_back(sh);
    }
    return shapes;
}

ParamVector zero_params(const std::vector<LayerSpec>& arch) {
    ParamVector p;
    p.shapes = build_shapes(arch);
    const LayerShape& last = p.shapes.back();
    p.values.assign(last.offset + last.weight_count + last.bias_count, 0.0f);
    return p;
}

ParamVector init_params(const std::vector<LayerSpec>& arch, Rng& rng) {
    ParamVector p = zero_params(arch);
    for (std::size_t l = 0; l < p.shapes.size(); ++l) {
        const LayerShape& sh = p.shapes[l];
        const double s = std::sqrt(6.0 / static_cast<double>(sh.spec.input_dim + sh.spec.output_dim));
        float* w = p.values.data() + sh.offset;
        for (std::size_t i = 0; i < sh.weight_count; ++i) {
            w[i] = static_cast<float>(rng.uniform(-s, s));
        }
        // biases stay zero
    }
    return p;
}

Batch gather_batch(const DatasetView& view, std::span<const std::int32_t> positions) {
    Batch b;
    b.features = MatF(positions.size(), view.ds->dim());
    b.labels.resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const std::int32_t row = view.indices[positions[i]];
        const float* src = view.ds->features.row_ptr(row);
        std::copy(src, src + view.ds->dim(), b.features.row_ptr(i));
        b.labels[i] = view.ds->labels[row];
    }
    return b;
}

MatD forward(const ParamVector& params, const Batch& batch) {
    ForwardTrace t = forward_trace(params, batch);
    return std::move(t.activations.back());
}

LossGrad loss_and_grad(const ParamVector& params, const Batch& batch) {
    if (batch.size() == 0) {
        throw InvalidInputError("loss_and_grad: empty batch");
    }
    ForwardTrace t = forward_trace(params, batch);

    LossGrad out;
    out.grad = ParamVector{std::vector<float>(params.values.size(), 0.0f), params.shapes};

    MatD delta;  // d(loss)/d(current layer pre-activation)
    out.loss = softmax_ce(t.activations.back(), batch.labels, &delta);

    for (std::size_t li = params.shapes.size(); li-- > 0;) {
        const LayerShape& sh = params.shapes[li];
        const std::size_t in = sh.spec.input_dim;
        const std::size_t outdim = sh.spec.output_dim;
        const MatD& a_prev = t.activations[li];

        // final layer is identity; hidden relu masks its delta
        if (sh.spec.activation == Activation::relu) {
            for (std::size_t i = 0; i < delta.data.size(); ++i) {
                if (t.preacts[li].data[i] <= 0.0) delta.data[i] = 0.0;
            }
        }

        float* gw = out.grad.values.data() + sh.offset;
        float* gb = gw + sh.weight_count;
        std::vector<double> acc(sh.weight_count + sh.bias_count, 0.0);
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* dr = delta.row_ptr(r);
            const double* ar = a_prev.row_ptr(r);
            for (std::size_t k = 0; k < in; ++k) {
                double* wrow = acc.data() + k * outdim;
                const double av = ar[k];
                for (std::size_t j = 0; j < outdim; ++j) {
                    wrow[j] += av * dr[j];
                }
            }
            double* brow = acc.data() + sh.weight_count;
            for (std::size_t j = 0; j < outdim; ++j) {
                brow[j] += dr[j];
            }
        }
        for (std::size_t i = 0; i < sh.weight_count; ++i) gw[i] = static_cast<float>(acc[i]);
        for (std::size_t j = 0; j < sh.bias_count; ++j) gb[j] = static_cast<float>(acc[sh.weight_count + j]);

        if (li > 0) {
            const float* w = params.values.data() + sh.offset;
            MatD next(delta.rows, in);
            for (std::size_t r = 0; r < delta.rows; ++r) {
                const double* dr = delta.row_ptr(r);
                double* nr = next.row_ptr(r);
                for (std::size_t k = 0; k < in; ++k) {
                    const float* wrow = w + k * outdim;
                    double s = 0.0;
                    for (std::size_t j = 0; j < outdim; ++j) {
                        s += static_cast<double>(wrow[j]) * dr[j];
                    }
                    nr[k] = s;
                }
            }
            delta = std::move(next);
        }
    }
    return out;
}

double batch_loss(const ParamVector& params, const Batch& batch) {
    if (batch.size() == 0) {
        throw InvalidInputError("batch_loss: empty batch");
    }
    ForwardTrace t = forward_trace(params, batch);
    return softmax_ce(t.activations.back(), batch.labels, nullptr);
}

ParamVector train_epochs(const ParamVector& params, const DatasetView& shard,
                         std::size_t epochs, double lr, std::size_t batch_size, Rng& rng) {
    if (lr < 0.0) {
        throw ConfigError("train_epochs: learning_rate must be >= 0");
    }
    if (epochs < 1) {
        throw ConfigError("train_epochs: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train_epochs: batch_size must be >= 1");
    }
    if (shard.size() == 0) {
        throw InvalidInputError("train_epochs: empty shard");
    }

    ParamVector p = params;
    std::vector<std::int32_t> order(shard.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t len = std::min(batch_size, order.size() - start);
            Batch b = gather_batch(shard, std::span<const std::int32_t>(order.data() + start, len));
            LossGrad lg = loss_and_grad(p, b);
            for (std::size_t i = 0; i < p.values.size(); ++i) {
                p.values[i] = static_cast<float>(static_cast<double>(p.values[i]) -
                                                 lr * static_cast<double>(lg.grad.values[i]));
            }
        }
    }
    return p;
}

EvalResult evaluate(const ParamVector& params, const DatasetView& dataset) {
    if (dataset.size() == 0) {
        throw InvalidInputError("evaluate: empty dataset");
    }
    constexpr std::size_t kChunk = 256;
    std::vector<std::int32_t> positions(dataset.size());
    std::iota(positions.begin(), positions.end(), 0);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < positions.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, positions.size() - start);
        Batch b = gather_batch(dataset, std::span<const std::int32_t>(positions.data() + start, len));
        MatD logits = forward(params, b);
        for (std::size_t i = 0; i < len; ++i) {
            const double* z = logits.row_ptr(i);
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols; ++j) {
                if (z[j] > z[best]) best = j;  // ties keep the lowest index
            }
            if (static_cast<std::int32_t>(best) == b.labels[i]) ++correct;

            double m = z[0];
            for (std::size_t j = 1; j < logits.cols; ++j) m = std::max(m, z[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < logits.cols; ++j) sum += std::exp(z[j] - m);
            loss_sum += m + std::log(sum) - z[b.labels[i]];
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    r.loss = loss_sum / static_cast<double>(dataset.size());
    return r;
}

double view_loss(const ParamVector& params, const DatasetView& dataset) {
    return evaluate(params, dataset).loss;
}

} // namespace fedsim
