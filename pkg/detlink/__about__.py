__author__ = "big-o"
__author_email__ = "big-o@users.noreply.github.com"
__version__ = "0.1.0"
__release__ = __version__
__name__ = "detlink"
__title__ = "detlink"
__description__ = "Link object detections across time, stereo cameras and detectors."
__url__ = "https://detlink.readthedocs.io"
