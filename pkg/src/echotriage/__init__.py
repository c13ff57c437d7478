"""Echocardiogram triage pipeline.

Parses multi-frame ultrasound DICOM studies, assigns standard views, segments
heart chambers through pluggable backends, computes LVEF by the method of
disks, and triages studies as normal / grey zone / abnormal.
"""

__version__ = "0.1.0"
