// Thin Python surface over the core library. Filesystem operations use the
// real backend; structured results cross the boundary as JSON text.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ckpt/faults.hpp"
#include "ckpt/guard.hpp"
#include "ckpt/harness.hpp"
#include "ckpt/payload.hpp"
#include "ckpt/stats.hpp"

namespace py = pybind11;
using namespace ckpt;

namespace {

template <class T, class F>
T parse_name(F from_name, const std::string& name, const char* what) {
  auto v = from_name(name);
  if (!v) throw py::value_error(std::string("unknown ") + what + ": " + name);
  return *v;
}

Bytes to_bytes(const py::bytes& b) {
  const std::string_view s = b;
  return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

TensorBlob make_blob(const std::string& dtype, std::vector<std::uint64_t> shape, const py::bytes& payload) {
  return TensorBlob{parse_name<Dtype>(dtype_from_name, dtype, "dtype"), std::move(shape), to_bytes(payload)};
}

GroupSizes sizes_of(std::size_t model, std::size_t optimizer, std::size_t rng) { return {model, optimizer, rng}; }

Json injection_json(const InjectionRecord& r) {
  return Json{{"file", r.file},
              {"kind", std::string(to_string(r.kind))},
              {"offset", r.offset},
              {"length", r.length},
              {"bit", r.bit},
              {"original_length", r.original_length},
              {"new_length", r.new_length},
              {"bytes_actually_changed", r.bytes_actually_changed}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<NoValidCheckpoint>(m, "NoValidCheckpoint");
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("encode_container", [](const std::string& dtype, std::vector<std::uint64_t> shape, const py::bytes& payload) {
    const TensorBlob blob = make_blob(dtype, std::move(shape), payload);
    if (!blob.well_formed()) throw py::value_error("payload length does not match shape");
    return from_bytes(encode_container(blob));
  });

  m.def("decode_container", [](const py::bytes& data) -> py::tuple {
    const Bytes b = to_bytes(data);
    const DecodeResult r = decode_container(b);
    if (const auto* e = std::get_if<LoadError>(&r))
      throw py::value_error(std::string(to_string(e->code)) + ": " + e->detail);
    const auto& t = std::get<TensorBlob>(r);
    return py::make_tuple(std::string(canonical_name(t.dtype)), t.shape, from_bytes(t.payload));
  });

  m.def("tensor_digest", [](const std::string& dtype, std::vector<std::uint64_t> shape, const py::bytes& payload) {
    return tensor_digest(make_blob(dtype, std::move(shape), payload)).hex();
  });

  m.def(
      "write_group",
      [](const std::string& dir, const std::string& mode, std::uint64_t seed, std::int64_t epoch, std::size_t model,
         std::size_t optimizer, std::size_t rng) {
        RealFs fs;
        const auto m = parse_name<WriteMode>(write_mode_from_name, mode, "mode");
        const auto parts = synthetic_parts(seed, epoch, sizes_of(model, optimizer, rng));
        const GroupMeta meta{"py-" + std::to_string(seed), epoch, seed};
        py::gil_scoped_release release;
        return write_group(fs, GroupLayout{dir}, parts, m, meta).bytes_written;
      },
      py::arg("dir"), py::arg("mode") = "atomic_dirsync", py::arg("seed") = 1, py::arg("epoch") = 3,
      py::arg("model_bytes") = 131072, py::arg("optimizer_bytes") = 65536, py::arg("rng_bytes") = 256);

  m.def("validate_group_json", [](const std::string& dir) {
    RealFs fs;
    return validate_group(fs, dir).to_json().dump();
  });

  m.def("recover_latest_json", [](const std::string& root) {
    RealFs fs;
    const RecoveryResult r = recover_latest(fs, root);
    return Json{{"group_path", r.group_path}, {"group_name", r.group_name}, {"quarantined", r.quarantined}}.dump();
  });

  m.def("read_latest_ok", [](const std::string& root) {
    RealFs fs;
    return read_latest_ok(fs, root);
  });

  m.def(
      "inject_file_json",
      [](const std::string& path, const std::string& kind, std::uint64_t seed, bool verify_changed) {
        RealFs fs;
        const auto k = parse_name<FaultKind>(fault_kind_from_name, kind, "fault kind");
        return injection_json(inject_file(fs, path, k, seed, verify_changed)).dump();
      },
      py::arg("path"), py::arg("kind"), py::arg("seed"), py::arg("verify_changed") = false);

  m.def("percentile", [](std::vector<double> values, double q) { return percentile(values, q); });

  m.def(
      "binomial_ci",
      [](std::uint64_t k, std::uint64_t n, const std::string& method) {
        const ProportionCI ci = binomial_ci(k, n, parse_name<CiMethod>(ci_method_from_name, method, "method"));
        return py::make_tuple(ci.lo, ci.hi);
      },
      py::arg("k"), py::arg("n"), py::arg("method") = "exact");

  m.def(
      "run_crash_trials",
      [](const std::string& root, const std::string& plan, std::size_t model, std::size_t optimizer, std::size_t rng) {
        ExperimentConfig c;
        c.root = root;
        c.plan = TrialPlan::parse(plan);
        c.sizes = sizes_of(model, optimizer, rng);
        py::gil_scoped_release release;
        return run_crash_trials(c);
      },
      py::arg("root"), py::arg("plan"), py::arg("model_bytes") = 131072, py::arg("optimizer_bytes") = 65536,
      py::arg("rng_bytes") = 256);

  m.def(
      "run_corruption_trials",
      [](const std::string& root, std::size_t trials, bool verify_changed, std::size_t model, std::size_t optimizer,
         std::size_t rng) {
        ExperimentConfig c;
        c.root = root;
        c.trials_per_fault = trials;
        c.verify_changed = verify_changed;
        c.sizes = sizes_of(model, optimizer, rng);
        py::gil_scoped_release release;
        return run_corruption_trials(c);
      },
      py::arg("root"), py::arg("trials") = 400, py::arg("verify_changed") = false, py::arg("model_bytes") = 131072,
      py::arg("optimizer_bytes") = 65536, py::arg("rng_bytes") = 256);

  m.def(
      "make_report",
      [](const std::string& bench, const std::string& crash, const std::string& corrupt, const std::string& out,
         const std::string& method) {
        const ReportFiles f = make_report(ReportInputs{bench, crash, corrupt}, out,
                                          parse_name<CiMethod>(ci_method_from_name, method, "method"));
        return f.notes;
      },
      py::arg("bench") = "", py::arg("crash") = "", py::arg("corrupt") = "", py::arg("out") = "report",
      py::arg("ci_method") = "exact");
}
