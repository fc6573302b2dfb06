#pragma once

// Builds small ONNX model files for tests, writing the protobuf wire format
// directly. Kept independent of the reader in effocr/onnx.hpp.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace testutil::onnx {

class ProtoWriter {
public:
    std::string buf;

    void varint(uint64_t v) {
        while (v >= 0x80) {
            buf.push_back(static_cast<char>((v & 0x7F) | 0x80));
            v >>= 7;
        }
        buf.push_back(static_cast<char>(v));
    }
    void tag(uint32_t field, uint32_t wire) { varint((static_cast<uint64_t>(field) << 3) | wire); }
    void vint(uint32_t field, uint64_t v) {
        tag(field, 0);
        varint(v);
    }
    void str(uint32_t field, const std::string& s) {
        tag(field, 2);
        varint(s.size());
        buf.append(s);
    }
    void f32(uint32_t field, float v) {
        tag(field, 5);
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (i * 8)) & 0xFF));
    }
};

inline std::string float_tensor(const std::string& name, const std::vector<int64_t>& dims,
                                const std::vector<float>& values) {
    ProtoWriter w;
    for (int64_t d : dims) w.vint(1, static_cast<uint64_t>(d));
    w.vint(2, 1); // FLOAT
    std::string raw(values.size() * 4, '\0');
    std::memcpy(raw.data(), values.data(), raw.size());
    w.str(8, name);
    w.str(9, raw);
    return w.buf;
}

inline std::string int64_tensor(const std::string& name, const std::vector<int64_t>& dims,
                                const std::vector<int64_t>& values) {
    ProtoWriter w;
    for (int64_t d : dims) w.vint(1, static_cast<uint64_t>(d));
    w.vint(2, 7); // INT64
    for (int64_t v : values) w.vint(7, static_cast<uint64_t>(v));
    w.str(8, name);
    return w.buf;
}

struct NodeDef {
    std::string op_type;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, int64_t>> int_attrs;
    std::vector<std::pair<std::string, float>> float_attrs;
};

inline std::string node(const NodeDef& def) {
    ProtoWriter w;
    for (const auto& i : def.inputs) w.str(1, i);
    for (const auto& o : def.outputs) w.str(2, o);
    w.str(4, def.op_type);
    for (const auto& [name, value] : def.int_attrs) {
        ProtoWriter a;
        a.str(1, name);
        a.vint(3, static_cast<uint64_t>(value));
        a.vint(20, 2); // AttributeProto.INT
        w.str(5, a.buf);
    }
    for (const auto& [name, value] : def.float_attrs) {
        ProtoWriter a;
        a.str(1, name);
        a.f32(2, value);
        a.vint(20, 1); // AttributeProto.FLOAT
        w.str(5, a.buf);
    }
    return w.buf;
}

inline std::string value_info(const std::string& name) {
    ProtoWriter w;
    w.str(1, name);
    return w.buf;
}

inline std::string graph(const std::vector<std::string>& nodes,
                         const std::vector<std::string>& initializers,
                         const std::vector<std::string>& inputs,
                         const std::vector<std::string>& outputs) {
    ProtoWriter w;
    for (const auto& n : nodes) w.str(1, n);
    w.str(2, "g");
    for (const auto& t : initializers) w.str(5, t);
    for (const auto& i : inputs) w.str(11, value_info(i));
    for (const auto& o : outputs) w.str(12, value_info(o));
    return w.buf;
}

inline std::string model(const std::string& graph_bytes) {
    ProtoWriter w;
    w.vint(1, 8); // ir_version
    w.str(7, graph_bytes);
    return w.buf;
}

/// x[1,1,H,W] -> Flatten -> MatMul(weights[HW,d]) -> Add(bias[d]) -> y.
inline std::string linear_model(int h, int w, int dim, const std::vector<float>& weights,
                                const std::vector<float>& bias) {
    const std::string w_tensor =
        float_tensor("W", {static_cast<int64_t>(h) * w, dim}, weights);
    const std::string b_tensor = float_tensor("b", {dim}, bias);
    const std::string flatten = node({"Flatten", {"x"}, {"flat"}, {{"axis", 1}}, {}});
    const std::string matmul = node({"MatMul", {"flat", "W"}, {"mm"}, {}, {}});
    const std::string add = node({"Add", {"mm", "b"}, {"y"}, {}, {}});
    return model(graph({flatten, matmul, add}, {w_tensor, b_tensor}, {"x"}, {"y"}));
}

/// A detection head that ignores its input: zero weights plus a bias holding
/// the constant output rows. Output is flat [1, N*(5+C)].
inline std::string constant_detector_model(int h, int w, const std::vector<float>& rows) {
    const int dim = static_cast<int>(rows.size());
    const std::vector<float> weights(static_cast<size_t>(h) * w * dim, 0.0f);
    return linear_model(h, w, dim, weights, rows);
}

} // namespace testutil::onnx
