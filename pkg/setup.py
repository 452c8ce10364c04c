from setuptools import setup
from setuptools_rust import Binding, RustExtension

setup(
    rust_extensions=[
        RustExtension(
            "dynkcenter._core",
            path="rust/Cargo.toml",
            binding=Binding.PyO3,
            # without a Rust toolchain the package still installs and uses
            # the pure-Python core
            optional=True,
            debug=False,
        )
    ],
    zip_safe=False,
)
