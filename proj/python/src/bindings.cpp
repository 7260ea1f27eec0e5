#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sparselets/bench.hpp"
#include "sparselets/image.hpp"
#include "sparselets/loggabor.hpp"
#include "sparselets/priors.hpp"
#include "sparselets/pursuit.hpp"
#include "sparselets/shl.hpp"
#include "sparselets/synth.hpp"

namespace py = pybind11;
using namespace sparselets;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array2& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return Image(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Image& img) {
    py::array_t<double> out({img.height(), img.width()});
    std::copy(img.values().begin(), img.values().end(), out.mutable_data());
    return out;
}

std::vector<Eigen::VectorXd> rows_of(const Eigen::MatrixXd& patches) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(patches.rows());
    for (Eigen::Index i = 0; i < patches.rows(); ++i) out.emplace_back(patches.row(i).transpose());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sparse edge coding of natural images with log-Gabor matching pursuit";

    py::register_exception<NothingToMatch>(m, "NothingToMatch", PyExc_RuntimeError);

    // images
    py::class_<WhiteningParams>(m, "WhiteningParams")
        .def(py::init<>())
        .def_readwrite("f0_nyquist_fraction", &WhiteningParams::f0_nyquist_fraction)
        .def_readwrite("steepness", &WhiteningParams::steepness);

    m.def("load_image", [](const std::filesystem::path& p, int size) { return to_array(load_image(p, size)); },
          py::arg("path"), py::arg("size"));
    m.def("whiten", [](const Array2& a, const WhiteningParams& p) { return to_array(whiten(to_image(a), p)); },
          py::arg("image"), py::arg("params") = WhiteningParams{});
    m.def("apply_circular_mask", [](const Array2& a) { return to_array(apply_circular_mask(to_image(a))); });
    m.def("preprocess", [](const Array2& a, const WhiteningParams& p) { return to_array(preprocess(to_image(a), p)); },
          py::arg("image"), py::arg("params") = WhiteningParams{}, "whiten, mask, zero mean");

    // filter bank
    py::class_<BankParams>(m, "BankParams")
        .def(py::init<>())
        .def_readwrite("n_scales", &BankParams::n_scales)
        .def_readwrite("n_orientations", &BankParams::n_orientations)
        .def_readwrite("bandwidth_log_frequency", &BankParams::bandwidth_log_frequency)
        .def_readwrite("bandwidth_orientation", &BankParams::bandwidth_orientation)
        .def_readwrite("scale_ratio", &BankParams::scale_ratio)
        .def_readwrite("f_max", &BankParams::f_max)
        .def_readwrite("samples_per_wavelength", &BankParams::samples_per_wavelength)
        .def_readwrite("orientations", &BankParams::orientations)
        .def("scale_count", &BankParams::scale_count);

    py::class_<Address>(m, "Address")
        .def(py::init([](int scale, int orientation, int x, int y) { return Address{scale, orientation, x, y}; }),
             py::arg("scale"), py::arg("orientation"), py::arg("x"), py::arg("y"))
        .def_readwrite("scale", &Address::scale)
        .def_readwrite("orientation", &Address::orientation)
        .def_readwrite("x", &Address::x)
        .def_readwrite("y", &Address::y)
        .def("__repr__", [](const Address& a) {
            return "Address(scale=" + std::to_string(a.scale) + ", orientation=" + std::to_string(a.orientation) +
                   ", x=" + std::to_string(a.x) + ", y=" + std::to_string(a.y) + ")";
        });

    py::class_<LogGaborBank>(m, "LogGaborBank")
        .def(py::init<const BankParams&, int>(), py::arg("params"), py::arg("image_size"))
        .def_property_readonly("image_size", &LogGaborBank::image_size)
        .def_property_readonly("n_scales", &LogGaborBank::n_scales)
        .def_property_readonly("n_orientations", &LogGaborBank::n_orientations)
        .def_property_readonly("coefficient_count", &LogGaborBank::coefficient_count)
        .def("theta", &LogGaborBank::theta)
        .def("synthesize_atom",
             [](const LogGaborBank& b, const Address& a, std::complex<double> c) {
                 return to_array(synthesize_atom(b, a, c));
             })
        .def("inner_product", [](const LogGaborBank& b, const Array2& img, const Address& a) {
            return atom_inner_product(to_image(img), b, a);
        });

    m.def("analyze", [](const Array2& img, const LogGaborBank& bank) {
        const auto stack = analyze(to_image(img), bank);
        py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(stack.size()));
        std::copy(stack.values().begin(), stack.values().end(), out.mutable_data());
        return out;
    }, "complex coefficients of every atom, channel-major");

    // pursuit
    py::class_<PursuitParams>(m, "PursuitParams")
        .def(py::init<>())
        .def_readwrite("alpha", &PursuitParams::alpha)
        .def_readwrite("max_edges", &PursuitParams::max_edges)
        .def_readwrite("energy_threshold", &PursuitParams::energy_threshold)
        .def_readwrite("tie_epsilon", &PursuitParams::tie_epsilon)
        .def_readwrite("refresh_interval", &PursuitParams::refresh_interval)
        .def_readwrite("kernel_tolerance", &PursuitParams::kernel_tolerance);

    py::class_<Edge>(m, "Edge")
        .def_readonly("address", &Edge::address)
        .def_readonly("theta", &Edge::theta)
        .def_readonly("coeff", &Edge::coeff)
        .def_readonly("step", &Edge::step);

    py::class_<EdgeList>(m, "EdgeList")
        .def_readonly("edges", &EdgeList::edges)
        .def_readonly("image_size", &EdgeList::image_size)
        .def_readonly("initial_energy", &EdgeList::initial_energy)
        .def_readonly("alpha", &EdgeList::alpha)
        .def_property_readonly("step_count", [](const EdgeList& e) { return e.steps.size(); })
        .def("__len__", &EdgeList::size)
        .def("energy_curve", [](const EdgeList& e) { return energy_curve(e, e.alpha); },
             "residual energy fraction after each step")
        .def("to_json", [](const EdgeList& e) { return edges_to_json(e); })
        .def_static("from_json", &edges_from_json);

    m.def("extract", [](const Array2& img, const LogGaborBank& bank, const PursuitParams& p) {
        return extract(to_image(img), bank, p);
    }, py::arg("image"), py::arg("bank"), py::arg("params") = PursuitParams{},
       py::call_guard<py::gil_scoped_release>());
    m.def("reconstruct", [](const EdgeList& e, const LogGaborBank& bank) { return to_array(reconstruct(e, bank)); });

    // priors
    py::class_<ChevronBins>(m, "ChevronBins")
        .def(py::init<>())
        .def_readwrite("n_psi", &ChevronBins::n_psi)
        .def_readwrite("n_theta", &ChevronBins::n_theta)
        .def_readwrite("d_edges", &ChevronBins::d_edges)
        .def_readwrite("n_sigma", &ChevronBins::n_sigma)
        .def_readwrite("modulus_weighted", &ChevronBins::modulus_weighted);

    py::class_<ChevronHistogram>(m, "ChevronHistogram")
        .def_property_readonly("bins", &ChevronHistogram::bins)
        .def_property_readonly("pair_count", &ChevronHistogram::pair_count)
        .def("total", &ChevronHistogram::total)
        .def("ratio_map", [](const ChevronHistogram& h) {
            const auto map = h.ratio_map();
            py::array_t<double> out({h.bins().n_theta, h.bins().n_psi});
            std::copy(map.begin(), map.end(), out.mutable_data());
            return out;
        }, "(theta, psi) ratio to a uniform prior")
        .def("to_json", &ChevronHistogram::to_json)
        .def_static("from_json", &ChevronHistogram::from_json);

    m.def("angle_bin", &angle_bin, py::arg("angle"), py::arg("n"));
    m.def("chevron_stats", &chevron_stats, py::arg("corpus"), py::arg("bins") = ChevronBins{});
    m.def("equalize_orientations", [](const std::vector<EdgeList>& corpus, int n) {
        return equalize_orientations(orientation_stats(corpus), n);
    }, py::arg("corpus"), py::arg("n_orientations") = 24, "orientations equalizing the corpus histogram");

    py::class_<CoocParams>(m, "CoocParams")
        .def(py::init<>())
        .def_readwrite("eta", &CoocParams::eta)
        .def_readwrite("neighborhood_radius", &CoocParams::neighborhood_radius)
        .def_readwrite("epsilon_prob", &CoocParams::epsilon_prob);

    m.def("extract_with_prior",
          [](const Array2& img, const LogGaborBank& bank, const ChevronHistogram& prior, const PursuitParams& p,
             const CoocParams& c) { return extract_with_prior(to_image(img), bank, prior, p, c); },
          py::arg("image"), py::arg("bank"), py::arg("prior"), py::arg("params") = PursuitParams{},
          py::arg("cooc") = CoocParams{}, py::call_guard<py::gil_scoped_release>());

    // sparse hebbian learning
    py::enum_<HomeoMode>(m, "HomeoMode")
        .value("none", HomeoMode::none)
        .value("gain_variance", HomeoMode::gain_variance)
        .value("histogram_equalization", HomeoMode::histogram_equalization);

    py::class_<SHLParams>(m, "SHLParams")
        .def(py::init<>())
        .def_readwrite("patch_side", &SHLParams::patch_side)
        .def_readwrite("n_atoms", &SHLParams::n_atoms)
        .def_readwrite("eta", &SHLParams::eta)
        .def_readwrite("l0_target", &SHLParams::l0_target)
        .def_readwrite("n_steps", &SHLParams::n_steps)
        .def_readwrite("batch_size", &SHLParams::batch_size)
        .def_readwrite("homeo_mode", &SHLParams::homeo_mode)
        .def_readwrite("homeo_rate", &SHLParams::homeo_rate)
        .def_readwrite("seed", &SHLParams::seed);

    py::class_<Dictionary>(m, "Dictionary")
        .def(py::init<Eigen::MatrixXd, HomeoMode>(), py::arg("atoms"), py::arg("mode") = HomeoMode::none)
        .def_property_readonly("atoms", [](const Dictionary& d) { return d.atoms(); })
        .def_property_readonly("L", &Dictionary::L)
        .def_property_readonly("M", &Dictionary::M);

    m.def("learn", [](const std::vector<Array2>& images, const SHLParams& p) {
        std::vector<Image> whitened;
        for (const auto& a : images) whitened.push_back(to_image(a));
        ImagePatchSource source(std::move(whitened), p.patch_side);
        py::gil_scoped_release release;
        return learn(source, p).dict;
    }, py::arg("whitened_images"), py::arg("params") = SHLParams{});

    m.def("code_mp", [](const Dictionary& d, const Eigen::VectorXd& patch, int l0) {
        const auto code = code_mp_plain(patch, d, l0);
        return code.dense(d.M());
    }, py::arg("dictionary"), py::arg("patch"), py::arg("l0"), "dense matching-pursuit code");
    m.def("kurtosis", &kurtosis);
    m.def("code_kurtosis", [](const Dictionary& d, const Eigen::MatrixXd& patches, int l0) {
        return code_kurtosis(d, rows_of(patches), l0);
    }, py::arg("dictionary"), py::arg("patches"), py::arg("l0"));
    m.def("pick_rates", [](const Dictionary& d, const Eigen::MatrixXd& patches, int l0) {
        return pick_rates(d, rows_of(patches), l0);
    }, py::arg("dictionary"), py::arg("patches"), py::arg("l0"));

    // benchmarks
    m.def("bits_per_pixel", &bits_per_pixel, py::arg("n"), py::arg("coefficient_count"), py::arg("image_size"));
    m.def("edges_to_reach", &edges_to_reach, py::arg("curve"), py::arg("residual_fraction"));
}
