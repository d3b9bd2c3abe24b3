# Even if empty this file is useful so that when running from the root folder the local
# code is added to sys.path by pytest. See
# https://docs.pytest.org/en/latest/pythonpath.html for more details.  For example, this
# allows to build extensions in place and run pytest using the package from the local
# folder rather than the one from site-packages.
