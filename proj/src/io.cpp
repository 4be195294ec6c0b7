namespace freedenoise {}
