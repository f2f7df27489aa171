from .geometry import (BACKGROUND, ROI_LABEL_IOU, Annotation, BBox, iou,
                       iou_matrix, label_rois)
from .generator import (CategorySet, DatasetConfig, DatasetError, DatasetManifest,
                        ImageSample, default_category_set, generate_dataset,
                        image_rng, total_object_count)
from .storage import load_dataset, read_ppm, save_dataset, write_ppm
from .figures import render_report_figures
