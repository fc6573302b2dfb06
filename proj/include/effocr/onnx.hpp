#pragma once

// Minimal ONNX-format model loader and evaluator. Reads the protobuf wire
// format directly (no protobuf dependency) and executes a small operator
// subset sufficient for MLP-style encoders and detection heads:
//   Identity, Flatten, Reshape, MatMul, Gemm, Add, Relu, Sigmoid, Tanh.
// Unsupported operators are rejected at load time.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "effocr/errors.hpp"

namespace effocr::onnx {

struct Tensor {
    std::string name;
    std::vector<int64_t> dims;
    int32_t data_type = 1; // 1 = float32, 7 = int64
    std::vector<float> floats;
    std::vector<int64_t> ints;

    size_t numel() const {
        size_t n = 1;
        for (int64_t d : dims) n *= static_cast<size_t>(d);
        return n;
    }
};

struct Attribute {
    std::string name;
    float f = 0.0f;
    int64_t i = 0;
    std::string s;
    std::vector<int64_t> ints;
};

struct Node {
    std::string op_type;
    std::string name;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<Attribute> attributes;

    const Attribute* find_attr(const std::string& attr_name) const {
        for (const auto& a : attributes)
            if (a.name == attr_name) return &a;
        return nullptr;
    }
    int64_t attr_i(const std::string& attr_name, int64_t def) const {
        const Attribute* a = find_attr(attr_name);
        return a ? a->i : def;
    }
    float attr_f(const std::string& attr_name, float def) const {
        const Attribute* a = find_attr(attr_name);
        return a ? a->f : def;
    }
};

struct Graph {
    std::vector<Node> nodes;
    std::vector<Tensor> initializers;
    std::vector<std::string> input_names;  // graph inputs minus initializers
    std::vector<std::string> output_names;
};

namespace detail {

class WireReader {
public:
    WireReader(const uint8_t* data, size_t size) : p_(data), end_(data + size) {}

    bool done() const { return p_ >= end_; }

    uint64_t varint() {
        uint64_t v = 0;
        int shift = 0;
        while (true) {
            if (p_ >= end_) throw ModelLoadError("onnx: truncated varint");
            const uint8_t b = *p_++;
            v |= static_cast<uint64_t>(b & 0x7F) << shift;
            if (!(b & 0x80)) break;
            shift += 7;
            if (shift > 63) throw ModelLoadError("onnx: varint overflow");
        }
        return v;
    }

    uint32_t fixed32() {
        if (p_ + 4 > end_) throw ModelLoadError("onnx: truncated fixed32");
        uint32_t v;
        std::memcpy(&v, p_, 4);
        p_ += 4;
        return v;
    }

    uint64_t fixed64() {
        if (p_ + 8 > end_) throw ModelLoadError("onnx: truncated fixed64");
        uint64_t v;
        std::memcpy(&v, p_, 8);
        p_ += 8;
        return v;
    }

    std::pair<const uint8_t*, size_t> bytes() {
        const uint64_t len = varint();
        if (p_ + len > end_) throw ModelLoadError("onnx: truncated length-delimited field");
        const uint8_t* start = p_;
        p_ += len;
        return {start, static_cast<size_t>(len)};
    }

    // Returns false at end of buffer; otherwise fills field number and wire type.
    bool next(uint32_t& field, uint32_t& wire) {
        if (done()) return false;
        const uint64_t key = varint();
        field = static_cast<uint32_t>(key >> 3);
        wire = static_cast<uint32_t>(key & 7);
        return true;
    }

    void skip(uint32_t wire) {
        switch (wire) {
            case 0: varint(); break;
            case 1: fixed64(); break;
            case 2: bytes(); break;
            case 5: fixed32(); break;
            default: throw ModelLoadError("onnx: unsupported wire type " + std::to_string(wire));
        }
    }

private:
    const uint8_t* p_;
    const uint8_t* end_;
};

inline float bits_to_float(uint32_t bits) {
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline int64_t zig_to_i64(uint64_t v) { return static_cast<int64_t>(v); }

inline Tensor parse_tensor(const uint8_t* data, size_t size) {
    Tensor t;
    WireReader r(data, size);
    uint32_t field, wire;
    std::string raw;
    while (r.next(field, wire)) {
        switch (field) {
            case 1: // dims
                if (wire == 0) {
                    t.dims.push_back(zig_to_i64(r.varint()));
                } else {
                    auto [p, n] = r.bytes();
                    WireReader rr(p, n);
                    while (!rr.done()) t.dims.push_back(zig_to_i64(rr.varint()));
                }
                break;
            case 2: t.data_type = static_cast<int32_t>(r.varint()); break;
            case 4: // float_data
                if (wire == 5) {
                    t.floats.push_back(bits_to_float(r.fixed32()));
                } else {
                    auto [p, n] = r.bytes();
                    WireReader rr(p, n);
                    while (!rr.done()) t.floats.push_back(bits_to_float(rr.fixed32()));
                }
                break;
            case 7: // int64_data
                if (wire == 0) {
                    t.ints.push_back(zig_to_i64(r.varint()));
                } else {
                    auto [p, n] = r.bytes();
                    WireReader rr(p, n);
                    while (!rr.done()) t.ints.push_back(zig_to_i64(rr.varint()));
                }
                break;
            case 8: { // name
                auto [p, n] = r.bytes();
                t.name.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 9: { // raw_data
                auto [p, n] = r.bytes();
                raw.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            default: r.skip(wire); break;
        }
    }
    if (!raw.empty()) {
        if (t.data_type == 1) {
            if (raw.size() % 4 != 0) throw ModelLoadError("onnx: raw float tensor size not multiple of 4");
            t.floats.resize(raw.size() / 4);
            std::memcpy(t.floats.data(), raw.data(), raw.size());
        } else if (t.data_type == 7) {
            if (raw.size() % 8 != 0) throw ModelLoadError("onnx: raw int64 tensor size not multiple of 8");
            t.ints.resize(raw.size() / 8);
            std::memcpy(t.ints.data(), raw.data(), raw.size());
        } else {
            throw ModelLoadError("onnx: unsupported tensor data type " + std::to_string(t.data_type));
        }
    }
    return t;
}

inline Attribute parse_attribute(const uint8_t* data, size_t size) {
    Attribute a;
    WireReader r(data, size);
    uint32_t field, wire;
    while (r.next(field, wire)) {
        switch (field) {
            case 1: {
                auto [p, n] = r.bytes();
                a.name.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 2: a.f = bits_to_float(r.fixed32()); break;
            case 3: a.i = zig_to_i64(r.varint()); break;
            case 4: {
                auto [p, n] = r.bytes();
                a.s.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 8: // ints
                if (wire == 0) {
                    a.ints.push_back(zig_to_i64(r.varint()));
                } else {
                    auto [p, n] = r.bytes();
                    WireReader rr(p, n);
                    while (!rr.done()) a.ints.push_back(zig_to_i64(rr.varint()));
                }
                break;
            default: r.skip(wire); break;
        }
    }
    return a;
}

inline Node parse_node(const uint8_t* data, size_t size) {
    Node node;
    WireReader r(data, size);
    uint32_t field, wire;
    while (r.next(field, wire)) {
        switch (field) {
            case 1: {
                auto [p, n] = r.bytes();
                node.inputs.emplace_back(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 2: {
                auto [p, n] = r.bytes();
                node.outputs.emplace_back(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 3: {
                auto [p, n] = r.bytes();
                node.name.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 4: {
                auto [p, n] = r.bytes();
                node.op_type.assign(reinterpret_cast<const char*>(p), n);
                break;
            }
            case 5: {
                auto [p, n] = r.bytes();
                node.attributes.push_back(parse_attribute(p, n));
                break;
            }
            default: r.skip(wire); break;
        }
    }
    return node;
}

inline std::string parse_value_info_name(const uint8_t* data, size_t size) {
    WireReader r(data, size);
    uint32_t field, wire;
    while (r.next(field, wire)) {
        if (field == 1 && wire == 2) {
            auto [p, n] = r.bytes();
            return std::string(reinterpret_cast<const char*>(p), n);
        }
        r.skip(wire);
    }
    return {};
}

inline Graph parse_graph(const uint8_t* data, size_t size) {
    Graph g;
    std::vector<std::string> declared_inputs;
    WireReader r(data, size);
    uint32_t field, wire;
    while (r.next(field, wire)) {
        switch (field) {
            case 1: {
                auto [p, n] = r.bytes();
                g.nodes.push_back(parse_node(p, n));
                break;
            }
            case 5: {
                auto [p, n] = r.bytes();
                g.initializers.push_back(parse_tensor(p, n));
                break;
            }
            case 11: {
                auto [p, n] = r.bytes();
                declared_inputs.push_back(parse_value_info_name(p, n));
                break;
            }
            case 12: {
                auto [p, n] = r.bytes();
                g.output_names.push_back(parse_value_info_name(p, n));
                break;
            }
            default: r.skip(wire); break;
        }
    }
    std::set<std::string> init_names;
    for (const auto& t : g.initializers) init_names.insert(t.name);
    for (const auto& name : declared_inputs)
        if (!init_names.count(name)) g.input_names.push_back(name);
    return g;
}

} // namespace detail

inline const std::set<std::string>& supported_ops() {
    static const std::set<std::string> ops = {"Identity", "Flatten", "Reshape", "MatMul",
                                              "Gemm",     "Add",     "Relu",    "Sigmoid",
                                              "Tanh"};
    return ops;
}

/// A loaded ONNX model restricted to the supported operator subset.
/// Immutable after load; run() is pure and safe to call concurrently.
class Model {
public:
    static Model parse(const uint8_t* data, size_t size) {
        Model m;
        detail::WireReader r(data, size);
        uint32_t field, wire;
        bool has_graph = false;
        while (r.next(field, wire)) {
            if (field == 7 && wire == 2) {
                auto [p, n] = r.bytes();
                m.graph_ = detail::parse_graph(p, n);
                has_graph = true;
            } else {
                r.skip(wire);
            }
        }
        if (!has_graph || m.graph_.output_names.empty())
            throw ModelLoadError("onnx: file has no graph or no outputs");
        for (const auto& node : m.graph_.nodes) {
            if (!supported_ops().count(node.op_type))
                throw ModelLoadError("onnx: unsupported operator '" + node.op_type + "'");
        }
        return m;
    }

    static Model load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ModelLoadError("onnx: cannot open model file: " + path);
        std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
        if (bytes.empty()) throw ModelLoadError("onnx: empty model file: " + path);
        try {
            return parse(bytes.data(), bytes.size());
        } catch (const ModelLoadError& e) {
            throw ModelLoadError(std::string(e.what()) + " (" + path + ")");
        }
    }

    const Graph& graph() const { return graph_; }

    /// Runs the graph with a single input tensor; returns the first output.
    Tensor run(const Tensor& input) const {
        if (graph_.input_names.size() != 1)
            throw ShapeMismatch("onnx: expected exactly one graph input, got " +
                                std::to_string(graph_.input_names.size()));
        std::map<std::string, Tensor> values;
        for (const auto& t : graph_.initializers) values[t.name] = t;
        values[graph_.input_names[0]] = input;

        for (const auto& node : graph_.nodes) {
            eval_node(node, values);
        }
        auto it = values.find(graph_.output_names[0]);
        if (it == values.end())
            throw ShapeMismatch("onnx: graph output '" + graph_.output_names[0] +
                                "' was never produced");
        return it->second;
    }

private:
    Graph graph_;

    static const Tensor& in(const Node& node, size_t i,
                            const std::map<std::string, Tensor>& values) {
        if (i >= node.inputs.size())
            throw ShapeMismatch("onnx: " + node.op_type + " missing input " + std::to_string(i));
        auto it = values.find(node.inputs[i]);
        if (it == values.end())
            throw ShapeMismatch("onnx: " + node.op_type + " input '" + node.inputs[i] +
                                "' not available");
        return it->second;
    }

    static void eval_node(const Node& node, std::map<std::string, Tensor>& values) {
        Tensor out;
        if (node.op_type == "Identity") {
            out = in(node, 0, values);
        } else if (node.op_type == "Flatten") {
            const Tensor& a = in(node, 0, values);
            const int64_t axis = node.attr_i("axis", 1);
            if (axis < 0 || axis > static_cast<int64_t>(a.dims.size()))
                throw ShapeMismatch("onnx: Flatten axis out of range");
            int64_t rows = 1, cols = 1;
            for (size_t i = 0; i < a.dims.size(); ++i)
                (static_cast<int64_t>(i) < axis ? rows : cols) *= a.dims[i];
            out = a;
            out.dims = {rows, cols};
        } else if (node.op_type == "Reshape") {
            const Tensor& a = in(node, 0, values);
            const Tensor& shape = in(node, 1, values);
            std::vector<int64_t> dims;
            int64_t known = 1;
            int infer_at = -1;
            for (size_t i = 0; i < shape.ints.size(); ++i) {
                int64_t d = shape.ints[i];
                if (d == 0) d = i < a.dims.size() ? a.dims[i] : 1;
                if (d == -1) {
                    infer_at = static_cast<int>(dims.size());
                    dims.push_back(1);
                    continue;
                }
                dims.push_back(d);
                known *= d;
            }
            if (infer_at >= 0) dims[infer_at] = static_cast<int64_t>(a.numel()) / known;
            size_t n = 1;
            for (int64_t d : dims) n *= static_cast<size_t>(d);
            if (n != a.numel()) throw ShapeMismatch("onnx: Reshape element count mismatch");
            out = a;
            out.dims = dims;
        } else if (node.op_type == "MatMul") {
            const Tensor& a = in(node, 0, values);
            const Tensor& b = in(node, 1, values);
            out = matmul(a, false, b, false, 1.0f);
        } else if (node.op_type == "Gemm") {
            const Tensor& a = in(node, 0, values);
            const Tensor& b = in(node, 1, values);
            const bool trans_a = node.attr_i("transA", 0) != 0;
            const bool trans_b = node.attr_i("transB", 0) != 0;
            const float alpha = node.attr_f("alpha", 1.0f);
            const float beta = node.attr_f("beta", 1.0f);
            out = matmul(a, trans_a, b, trans_b, alpha);
            if (node.inputs.size() > 2 && !node.inputs[2].empty()) {
                const Tensor& c = in(node, 2, values);
                add_broadcast(out, c, beta);
            }
        } else if (node.op_type == "Add") {
            out = in(node, 0, values);
            add_broadcast(out, in(node, 1, values), 1.0f);
        } else if (node.op_type == "Relu") {
            out = in(node, 0, values);
            for (float& v : out.floats) v = std::max(v, 0.0f);
        } else if (node.op_type == "Sigmoid") {
            out = in(node, 0, values);
            for (float& v : out.floats) v = 1.0f / (1.0f + std::exp(-v));
        } else if (node.op_type == "Tanh") {
            out = in(node, 0, values);
            for (float& v : out.floats) v = std::tanh(v);
        } else {
            throw ModelLoadError("onnx: unsupported operator '" + node.op_type + "'");
        }
        if (node.outputs.empty()) throw ModelLoadError("onnx: node without outputs");
        out.name = node.outputs[0];
        values[node.outputs[0]] = std::move(out);
    }

    static Tensor matmul(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b,
                         float alpha) {
        if (a.dims.size() != 2 || b.dims.size() != 2)
            throw ShapeMismatch("onnx: MatMul/Gemm supports 2-D tensors only");
        const int64_t m = trans_a ? a.dims[1] : a.dims[0];
        const int64_t k = trans_a ? a.dims[0] : a.dims[1];
        const int64_t kb = trans_b ? b.dims[1] : b.dims[0];
        const int64_t n = trans_b ? b.dims[0] : b.dims[1];
        if (k != kb) throw ShapeMismatch("onnx: inner dimensions do not match");
        Tensor out;
        out.data_type = 1;
        out.dims = {m, n};
        out.floats.assign(static_cast<size_t>(m * n), 0.0f);
        auto at_a = [&](int64_t i, int64_t j) {
            return trans_a ? a.floats[j * a.dims[1] + i] : a.floats[i * a.dims[1] + j];
        };
        auto at_b = [&](int64_t i, int64_t j) {
            return trans_b ? b.floats[j * b.dims[1] + i] : b.floats[i * b.dims[1] + j];
        };
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                float acc = 0.0f;
                for (int64_t t = 0; t < k; ++t) acc += at_a(i, t) * at_b(t, j);
                out.floats[i * n + j] = alpha * acc;
            }
        }
        return out;
    }

    // out += scale * b, where b has the same shape, is a trailing-dim row
    // vector, or is a scalar.
    static void add_broadcast(Tensor& out, const Tensor& b, float scale) {
        if (b.numel() == out.numel()) {
            for (size_t i = 0; i < out.floats.size(); ++i) out.floats[i] += scale * b.floats[i];
            return;
        }
        if (b.numel() == 1) {
            for (float& v : out.floats) v += scale * b.floats[0];
            return;
        }
        const size_t last = out.dims.empty() ? 0 : static_cast<size_t>(out.dims.back());
        if (b.numel() == last && last > 0) {
            for (size_t i = 0; i < out.floats.size(); ++i)
                out.floats[i] += scale * b.floats[i % last];
            return;
        }
        throw ShapeMismatch("onnx: Add operands are not broadcast-compatible");
    }
};

} // namespace effocr::onnx
