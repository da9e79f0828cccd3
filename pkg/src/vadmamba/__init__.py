"""Video anomaly detection with a vector-quantized state-space U-Net (VQ-MaU),
built on a small numpy autodiff engine."""

__version__ = "0.1.0"
