// Python bindings. Images cross the boundary as uint8 arrays of shape (H, W, 3), RGB.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "wmtrace/attacks.hpp"
#include "wmtrace/detector.hpp"
#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"
#include "wmtrace/payload.hpp"
#include "wmtrace/pipeline.hpp"

namespace py = pybind11;
using namespace wmtrace;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Raster to_raster(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorCode::ShapeError, "expected an (H, W, 3) uint8 array");
  Raster r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(r.data.data(), a.data(), r.data.size());
  return r;
}

ImageArray to_array(const Raster& r) {
  ImageArray a({r.height, r.width, 3});
  std::memcpy(a.mutable_data(), r.data.data(), r.data.size());
  return a;
}

py::bytes as_bytes(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::dict verdict_dict(const SchemeVerdict& v) {
  py::dict d;
  d["scheme"] = std::string(scheme_name(v.scheme));
  d["valid"] = v.valid;
  d["error"] = v.error.empty() ? py::object(py::none()) : py::str(v.error);
  d["signature_verified"] = v.signature_verified ? py::object(py::bool_(*v.signature_verified)) : py::none();
  d["fingerprint"] = v.recovered_fingerprint ? py::object(py::int_(v.recovered_fingerprint->value)) : py::none();
  d["correlation"] = v.correlation ? py::object(py::float_(*v.correlation)) : py::none();
  d["ber"] = v.ber ? py::object(py::float_(*v.ber)) : py::none();
  d["matched_candidate"] = v.matched_candidate ? py::object(py::int_(*v.matched_candidate)) : py::none();
  return d;
}

std::vector<RegistryEntry> entries_of(const std::vector<SignedPayload>& candidates) {
  std::vector<RegistryEntry> out;
  out.reserve(candidates.size());
  for (const auto& sp : candidates) out.push_back(registry_entry(sp));
  return out;
}

detector::EmbeddingPair make_pair(const std::vector<double>& e_img, const std::vector<double>& e_txt) {
  if (e_img.size() != e_txt.size()) throw Error(ErrorCode::ShapeError, "e_img and e_txt differ in length");
  detector::EmbeddingPair p;
  p.e_img = Eigen::Map<const detector::Vector>(e_img.data(), static_cast<Eigen::Index>(e_img.size()));
  p.e_txt = Eigen::Map<const detector::Vector>(e_txt.data(), static_cast<Eigen::Index>(e_txt.size()));
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Image watermark embedding, verification and tracing";

  static PyObject* exc = PyErr_NewException("wmtrace._core.WmtraceError", PyExc_RuntimeError, nullptr);
  m.attr("WmtraceError") = py::handle(exc);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(exc)(py::str(e.what()));
      err.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(exc, err.ptr());
    }
  });

  py::enum_<Scheme>(m, "Scheme")
      .value("LSB", Scheme::Lsb)
      .value("DCT", Scheme::Dct)
      .value("DWT", Scheme::Dwt)
      .value("SS", Scheme::Ss)
      .value("DWT_SS", Scheme::DwtSs);
  m.def("parse_scheme", [](const std::string& s) { return parse_scheme(s); });

  py::class_<PublicKey>(m, "PublicKey")
      .def_static("from_pem", &PublicKey::from_pem)
      .def("to_pem", &PublicKey::to_pem)
      .def_property_readonly("key_id", &PublicKey::key_id)
      .def_property_readonly("modulus_bits", &PublicKey::modulus_bits);

  py::class_<KeyPair>(m, "KeyPair")
      .def_static("generate", &KeyPair::generate)
      .def_static("from_pem", &KeyPair::from_pem)
      .def("private_pem", &KeyPair::private_pem)
      .def_property_readonly("public_key", &KeyPair::public_key)
      .def_property_readonly("key_id", &KeyPair::key_id);
  m.def("keypair_load_or_generate", &keypair_load_or_generate, py::arg("store_dir"));
  m.def("load_public_key", &load_public_key, py::arg("store_dir"));

  py::class_<SignedPayload>(m, "SignedPayload")
      .def_property_readonly("payload", [](const SignedPayload& s) { return as_bytes(s.payload_bytes); })
      .def_property_readonly("signature", [](const SignedPayload& s) { return as_bytes(s.signature); })
      .def_readonly("bit_length", &SignedPayload::bit_length)
      .def_readonly("label", &SignedPayload::plaintext_label)
      .def_property_readonly("fingerprint", [](const SignedPayload& s) { return derive_fingerprint(s).value; });

  m.def(
      "generate_payload",
      [](const std::string& user, int version, std::int64_t ts) { return as_bytes(generate_payload({user, version, ts})); },
      py::arg("user_id"), py::arg("rules_version"), py::arg("timestamp"));
  m.def(
      "parse_payload",
      [](const py::bytes& b) -> py::object {
        const auto spec = parse_payload(from_bytes(b));
        if (!spec) return py::none();
        return py::make_tuple(spec->user_id, spec->rules_version, spec->timestamp);
      },
      "(user_id, rules_version, timestamp) or None");
  m.def(
      "sign_payload",
      [](const KeyPair& kp, const py::bytes& payload, const std::string& label) {
        return sign_payload(kp, from_bytes(payload), label);
      },
      py::arg("key"), py::arg("payload"), py::arg("label") = "");
  m.def(
      "verify_signature",
      [](const PublicKey& pk, const py::bytes& payload, const py::bytes& sig) {
        return verify_signature(pk, from_bytes(payload), from_bytes(sig));
      },
      py::arg("public_key"), py::arg("payload"), py::arg("signature"));

  m.def(
      "encode",
      [](Scheme s, const ImageArray& img, const SignedPayload& sp, const PublicKey& pk) {
        return to_array(encode_scheme(s, to_raster(img), sp, keyed_params({}, pk)));
      },
      py::arg("scheme"), py::arg("image"), py::arg("signed"), py::arg("public_key"));
  m.def(
      "verify",
      [](Scheme s, const ImageArray& img, const std::vector<SignedPayload>& candidates, const PublicKey& pk) {
        const auto entries = entries_of(candidates);
        return verdict_dict(verify_scheme(s, to_raster(img), entries, pk, keyed_params({}, pk)));
      },
      py::arg("scheme"), py::arg("image"), py::arg("candidates"), py::arg("public_key"));

  m.def(
      "apply_attack",
      [](const ImageArray& img, const std::string& kind, double sigma, int quality, double factor) {
        attacks::AttackSpec spec{attacks::parse_kind(kind), sigma, quality, factor};
        spec.validate();
        return to_array(attacks::apply_attack(to_raster(img), spec));
      },
      py::arg("image"), py::arg("kind"), py::arg("sigma") = 0.5, py::arg("quality") = 50, py::arg("factor") = 0.8);

  m.def(
      "quality_report",
      [](const ImageArray& a, const ImageArray& b) {
        const QualityReport q = quality_report(to_raster(a), to_raster(b));
        py::dict d;
        d["psnr_db"] = q.psnr_db;
        d["max_abs_diff"] = q.max_abs_diff;
        d["mean_abs_diff"] = q.mean_abs_diff;
        return d;
      },
      py::arg("original"), py::arg("watermarked"));

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(io::load_image(p)); });
  m.def("save_image", [](const ImageArray& img, const std::filesystem::path& p) { io::save_image(to_raster(img), p); });

  py::class_<detector::DetectorModel>(m, "DetectorModel")
      .def_static("load", &detector::load_checkpoint)
      .def("save", [](const detector::DetectorModel& mdl, const std::filesystem::path& p) { detector::save_checkpoint(mdl, p); })
      .def_readwrite("threshold", &detector::DetectorModel::threshold)
      .def_property_readonly("embed_dim", &detector::DetectorModel::embed_dim)
      .def(
          "classify",
          [](const detector::DetectorModel& mdl, const std::vector<double>& e_img, const std::vector<double>& e_txt) {
            const auto c = detector::classify(mdl, make_pair(e_img, e_txt));
            return py::make_tuple(c.p, c.label);
          },
          py::arg("e_img"), py::arg("e_txt"));

  m.def(
      "train_jsonl",
      [](const std::filesystem::path& path, int epochs, int hidden1, int hidden2, std::uint64_t seed) {
        detector::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.hidden1 = hidden1;
        cfg.hidden2 = hidden2;
        cfg.rng_seed = seed;
        auto r = detector::train(detector::load_jsonl(path), cfg);
        py::list history;
        for (const auto& e : r.history)
          history.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_loss") = e.train_loss,
                                  py::arg("val_loss") = e.val_loss, py::arg("val_accuracy") = e.val_accuracy));
        return py::make_tuple(std::move(r.model), history);
      },
      py::arg("path"), py::arg("epochs") = 30, py::arg("hidden1") = 512, py::arg("hidden2") = 128,
      py::arg("seed") = 0);
}
