from django.urls import path
from . import views

urlpatterns = [
    path('', views.VerificationRunListView.as_view(), name='run-list'),
    path('<int:pk>/', views.VerificationRunDetailView.as_view(), name='run-detail'),
]
