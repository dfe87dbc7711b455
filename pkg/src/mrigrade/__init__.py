"""MRI enhancement-to-grading toolkit.

Histogram equalizers (HE, BBHE, RMSHE, DHE), quality metrics, gray-level
K-means segmentation, ROI shape/intensity/texture features and a linear
SVM benign/malignant classifier.
"""

__version__ = "0.1.0"

from .imgcore import GrayImage, Histogram, compute_histogram, load_image, mean_intensity, save_image
from .enhance import (
    TransferFunction,
    equalize_bbhe,
    equalize_dhe,
    equalize_he,
    equalize_rmshe,
    transfer_of,
)
from .quality import QualityReport, compare_methods, mse, psnr
from .segment import LabelMap, RoiMask, extract_roi, kmeans, largest_component, outline
from .features import FEATURE_NAMES, FeatureVector, extract_all
from .classify import SvmModel, TrainingSet, load_model, save_model, svm_classify, svm_train

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "GrayImage",
    "Histogram",
    "LabelMap",
    "QualityReport",
    "RoiMask",
    "SvmModel",
    "TrainingSet",
    "TransferFunction",
    "compare_methods",
    "compute_histogram",
    "equalize_bbhe",
    "equalize_dhe",
    "equalize_he",
    "equalize_rmshe",
    "extract_all",
    "extract_roi",
    "kmeans",
    "largest_component",
    "load_image",
    "load_model",
    "mean_intensity",
    "mse",
    "outline",
    "psnr",
    "save_image",
    "save_model",
    "svm_classify",
    "svm_train",
    "transfer_of",
]
